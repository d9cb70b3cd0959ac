import sys

from Backend.Cli.cli import run

if __name__ == "__main__":
    sys.exit(run())
