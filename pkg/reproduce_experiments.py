#!/usr/bin/env python3
"""
Desk-Scale Reproduction Driver
==============================

Checks the environment, then runs the desk-scale simulation studies
through the command line front end and lists the generated tables.

    1. Experiment 1 ordering (B = 100, dense contrasts, h = 0, |A| = 0..8)
    2. Weight convergence under the Experiment 2 design (B = 200)
    3. Normality of the standardized error (B = 500)

Usage:
    python reproduce_experiments.py [--check-deps] [--quick] [--threads N]
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List

OUTPUT_DIR = Path("output")

STUDIES: List[Dict] = [
    {
        'name': 'exp1_ordering',
        'command': 'simulate',
        'config': {'experiment': 'Exp1', 'B': 100, 'h': [0.0], 'A_size': list(range(9)),
                   'delta_mode': 'dense'},
    },
    {
        'name': 'weight_convergence',
        'command': 'weightconv',
        'config': {'experiment': 'WeightConv', 'B': 200},
    },
    {
        'name': 'normality',
        'command': 'normality',
        'config': {'experiment': 'Normality', 'B': 500},
    },
]

# Replication counts used with --quick.
QUICK_REPLICATIONS = {'exp1_ordering': 20, 'weight_convergence': 40, 'normality': 100}


# Minimum interpreter, matching python_requires in setup.py.
MIN_PYTHON = (3, 8)

# Packages the studies import, with what each one is needed for.
REQUIRED_PACKAGES = {
    'numpy': 'random streams and linear algebra',
    'scipy': 'Cholesky solves and power-law fits',
    'pandas': 'result tables',
    'joblib': 'threaded replications',
}


def check_dependencies() -> bool:
    """Check the interpreter and every package the studies import."""
    ready = True
    running = '.'.join(str(part) for part in sys.version_info[:3])
    if sys.version_info[:2] < MIN_PYTHON:
        print(f"❌ Python {running} is too old for transma (needs {MIN_PYTHON[0]}.{MIN_PYTHON[1]}+)")
        ready = False
    else:
        print(f"✅ Python {running}")

    missing = []
    for package, purpose in REQUIRED_PACKAGES.items():
        try:
            module = __import__(package)
            print(f"✅ {package} {getattr(module, '__version__', '')} is available ({purpose})")
        except ImportError:
            missing.append(package)
            print(f"❌ {package} is missing ({purpose})")

    if missing:
        print(f"\n❌ Missing packages: {', '.join(missing)}")
        print("Install them with: pip install -r requirements.txt")
        ready = False
    if ready:
        print("\n✅ Environment ready for the studies")
    return ready


def write_study_config(study: Dict, quick: bool) -> Path:
    """Write one study's JSON config under output/configs/."""
    config = dict(study['config'])
    if quick:
        config['B'] = QUICK_REPLICATIONS[study['name']]
    config_dir = OUTPUT_DIR / "configs"
    config_dir.mkdir(parents=True, exist_ok=True)
    path = config_dir / f"{study['name']}.json"
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(config, fh, indent=2)
    return path


def run_study(study: Dict, quick: bool, threads: int) -> bool:
    """Run one study through the command line front end."""
    import transma_cli

    print(f"\n🔬 Running {study['name']}...")
    config_path = write_study_config(study, quick)
    argv = [study['command'], '--config', str(config_path),
            '--out', str(OUTPUT_DIR / study['name']), '--threads', str(threads)]
    code = transma_cli.main(argv)
    if code != 0:
        print(f"❌ {study['name']} exited with code {code}")
        return False
    print(f"✅ {study['name']} finished")
    return True


def list_generated_files() -> None:
    """List the generated tables in the output directory."""
    files = sorted(path for path in OUTPUT_DIR.glob("*/*") if path.is_file())
    if not files:
        print("❌ No files found in output directory")
        return

    print("\n📁 Generated files:")
    for file in files:
        size = file.stat().st_size / 1024
        print(f"   • {file.relative_to(OUTPUT_DIR)} ({size:.1f} KB)")


def main() -> None:
    """Check the environment and run every study."""
    parser = argparse.ArgumentParser(description="Reproduce the desk-scale simulation studies")
    parser.add_argument("--check-deps", action="store_true",
                        help="Only check if dependencies are installed")
    parser.add_argument("--quick", action="store_true",
                        help="Fewer replications for a smoke run")
    parser.add_argument("--threads", type=int, default=1, help="Worker threads per study")
    args = parser.parse_args()

    print("📊 Transfer Model Averaging Reproduction")
    print("=" * 50)

    if not check_dependencies():
        sys.exit(1)
    if args.check_deps:
        return

    OUTPUT_DIR.mkdir(parents=True, exist_ok=True)
    results = [run_study(study, args.quick, args.threads) for study in STUDIES]
    list_generated_files()

    if all(results):
        print("\n🎉 All studies completed successfully!")
    else:
        sys.exit(1)


if __name__ == "__main__":
    main()
