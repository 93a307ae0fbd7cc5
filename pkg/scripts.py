import os
import subprocess


def test():
    """
    Run all unittests. Equivalent to:
    `poetry run python -u -m unittest discover`

    The acceptance experiments are skipped unless FEDLEC_ACCEPTANCE=1 is set.
    """
    subprocess.run(["python", "-u", "-m", "unittest", "discover"], env=dict(os.environ))
