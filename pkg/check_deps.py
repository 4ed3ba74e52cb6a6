#!/usr/bin/env python3

"""Report which peerfx requirements are importable, with their installed versions"""

import importlib
import re
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

ROOT = Path(__file__).resolve().parent
# Distribution name -> import name where they differ
IMPORT_NAMES = {"PyYAML": "yaml"}


def read_requirements(path: Path):
    """(distribution, specifier, commented) per requirement line; -r includes are skipped"""
    for line in path.read_text().splitlines():
        commented = line.startswith("#")
        text = line.lstrip("#").strip()
        match = re.match(r"^([A-Za-z0-9_.\-]+)\s*([<>=!~].*)?$", text)
        if match and not text.startswith("-"):
            yield match.group(1), match.group(2) or "", commented


def installed_version(distribution: str):
    try:
        importlib.import_module(IMPORT_NAMES.get(distribution, distribution.lower()))
    except ImportError:
        return None
    try:
        return version(distribution)
    except PackageNotFoundError:
        return "unknown version"


def main() -> int:
    required = [(name, spec) for name, spec, commented in read_requirements(ROOT / "requirements.txt")
                if not commented]
    optional = [(name, spec) for name, spec, commented in read_requirements(ROOT / "requirements.txt")
                if commented and name == "statsmodels"]

    missing = []
    print("peerfx runtime requirements")
    for name, spec in required:
        installed = installed_version(name)
        print(f"  {name:<12} {spec:<10} {installed or 'MISSING'}")
        if installed is None:
            missing.append(f"{name}{spec}")

    for name, spec in optional:
        installed = installed_version(name)
        print(f"  {name:<12} {spec:<10} {installed or 'not installed'} (optional, used by the tests)")

    if missing:
        print(f"\n{len(missing)} missing; install with: pip install " + " ".join(f"'{m}'" for m in missing))
        return 1
    print("\nEverything peerfx needs at run time is importable.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
