"""Module entry point for `python -m morphoprot`."""
from morphoprot.cli import app

if __name__ == "__main__":
    app()
