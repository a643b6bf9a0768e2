"""
Wiki-ES Command-Line Launcher

This script runs the Wiki-ES command-line interface from a source checkout.
It puts the src directory on the import path and hands the arguments over to
the subcommand dispatcher.

Usage:
    python run.py train --graph data/sample_graph.jsonl --corpus data/sample_corpus.jsonl --out rule.json --seed 7
    python run.py filter --graph data/sample_graph.jsonl --rule rule.json --corpus data/sample_corpus.jsonl

Dependencies:
- os: For file path operations
- sys: For the import path and exit code management
"""

import os
import sys


def main():
    """
    Run the Wiki-ES CLI.

    Exit codes:
    - 0: Successful execution
    - 1: Runtime failure (bad input files, degenerate training data, I/O errors)
    - 2: Usage error
    - 130: Interrupted
    """
    src_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "src")
    if not os.path.exists(os.path.join(src_path, "main.py")):
        print(f"Error: Could not find {src_path}/main.py", file=sys.stderr)
        sys.exit(1)
    sys.path.insert(0, src_path)

    from main import main as cli_main

    try:
        sys.exit(cli_main(sys.argv[1:]))
    except KeyboardInterrupt:
        print("\nStopped.", file=sys.stderr)
        sys.exit(130)


if __name__ == "__main__":
    main()
