"""Command line entry point: ``ringecho run|sweep|builtin|validate``.

Errors go to stderr as one JSON object ({"error", "key", "message"}) with a
nonzero exit status: 2 for invalid input, 1 for I/O or runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ringecho.core import ValidationError
from ringecho.scenarios import (
    BUILTINS,
    ScenarioError,
    load_config,
    resolve,
    run,
    run_builtin,
    sweep_cells,
    write_sweep,
)


def _fail(kind: str, message: str, key: str | None, code: int) -> int:
    print(json.dumps({"error": kind, "key": key, "message": message}, sort_keys=True),
          file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringecho", description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="ringecho-out",
                        help="output directory; all written paths are relative to it")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("config")
    p.add_argument("--no-occupations", action="store_true",
                   help="skip the per-cavity occupation CSV")
    p = sub.add_parser("sweep", help="run the [sweep] grid of a scenario file")
    p.add_argument("config")
    p.add_argument("--allow-large", action="store_true",
                   help="permit more than 10^4 sweep cells")
    p = sub.add_parser("builtin", help="reproduce a builtin figure or table")
    p.add_argument("name", choices=BUILTINS)
    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        if args.verb == "builtin":
            written = run_builtin(args.name, out)
        else:
            scenario, grid = load_config(args.config)
            if args.verb == "validate":
                cells = sweep_cells(scenario, grid) if grid else [scenario]
                for cell in cells:
                    resolve(cell)
                print(f"ok: {len(cells)} scenario(s)")
                return 0
            if args.verb == "run":
                written = list(run(scenario, out, occupations=not args.no_occupations).files.values())
            else:
                if not grid:
                    raise ScenarioError("sweep", "config has no [sweep] section")
                written = [write_sweep(scenario, grid, out, allow_large=args.allow_large)]
    except ScenarioError as exc:
        return _fail("validation", exc.message, exc.key, 2)
    except ValidationError as exc:
        return _fail("validation", str(exc), None, 2)
    except OSError as exc:
        return _fail("io", str(exc), None, 1)
    except Exception as exc:  # noqa: BLE001
        return _fail(type(exc).__name__, str(exc), None, 1)
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
