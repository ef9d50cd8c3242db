from __future__ import annotations

from .main import run_cli


if __name__ == "__main__":
    run_cli()
