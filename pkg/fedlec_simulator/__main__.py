import argparse
import sys

from fedlec_simulator.experiments import exceptions as experiment_exception
from fedlec_simulator.experiments import report as run_report
from fedlec_simulator.experiments import runner
from fedlec_simulator.utils.error_handler import FedLecSimulatorError
from fedlec_simulator.utils.lib import get_logger


def read_command_args(argv=None):
    parser = argparse.ArgumentParser(prog="fedlec_simulator",
                                     description="Federated spiking-network label-skew simulator")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run_parser = subparsers.add_parser("run", help="execute an experiment file (single run or sweep)")
    run_parser.add_argument("config", type=str, help="experiment file (toml or json)")
    run_parser.add_argument("--out", dest="out_dir", type=str, required=True, help="output directory")
    run_parser.add_argument("--workers", dest="workers", type=int, default=1,
                            help="threads training clients in parallel (FEDLEC_THREADS overrides it)")
    run_parser.add_argument("--seed", dest="seed", type=int, default=None, help="override the experiment seed")
    run_parser.add_argument("--no-progress", dest="progress", action="store_false", help="hide progress bars")

    compare_parser = subparsers.add_parser("compare", help="paired comparison of completed runs")
    compare_parser.add_argument("run_dirs", nargs="+", type=str, help="run directories")
    compare_parser.add_argument("--out", dest="out_csv", type=str, default=run_report.COMPARISON_FILENAME,
                                help="comparison csv file (default: comparison.csv in the working directory)")

    partition_parser = subparsers.add_parser("partition-report",
                                             help="print the label allocation of an experiment's partition")
    partition_parser.add_argument("config", type=str, help="experiment file (toml or json)")

    return parser.parse_args(argv)


def main(argv=None):
    # Get the command line arguments
    args = read_command_args(argv)
    logger = get_logger()

    try:
        if args.command == "run":
            experiment_runner = runner.ExperimentRunner(workers=args.workers, progress=args.progress)
            return experiment_runner.run(args.config, args.out_dir, seed=args.seed)

        experiment_runner = runner.ExperimentRunner(progress=False)
        if args.command == "compare":
            table = experiment_runner.compare(args.run_dirs, args.out_csv)
        else:
            table = experiment_runner.partition_report(args.config)
        print(table.to_string(float_format=lambda value: "{0:.4f}".format(value)))
        return runner.EXIT_OK
    except experiment_exception.ConfigError as error:
        logger.error(str(error))
        return runner.EXIT_CONFIG_ERROR
    except FedLecSimulatorError as error:
        logger.error(str(error))
        return runner.EXIT_RUNTIME_ERROR
    except OSError as error:
        logger.error("An error occurred: %s", error)
        return runner.EXIT_RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
