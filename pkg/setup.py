#!/usr/bin/env python3
"""
MOTIONTOK Setup Script
Checks the environment and puts the motiontok command on your PATH.

Usage:
    python setup.py install    Install missing packages and the motiontok launcher
    python setup.py check      Check Python, dependencies and thread settings
"""

import sys
import os
import platform
import subprocess

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
TOOL = 'motiontok'

# import name -> pip name
REQUIRED = {'numpy': 'numpy', 'torch': 'torch', 'tqdm': 'tqdm'}
DEV = {'pytest': 'pytest', 'hypothesis': 'hypothesis'}


def check_python():
    """Check Python version."""
    version = sys.version_info
    if version.major < 3 or (version.major == 3 and version.minor < 9):
        print(f"❌ Python 3.9+ required (found {version.major}.{version.minor})")
        return False
    print(f"✓ Python {version.major}.{version.minor}.{version.micro}")
    return True


def check_dependencies(packages):
    """Return pip names of packages that fail to import."""
    missing = []
    for module, pip_name in packages.items():
        try:
            mod = __import__(module)
            print(f"✓ {module} {getattr(mod, '__version__', '')}")
        except ImportError:
            print(f"❌ {module} - not installed")
            missing.append(pip_name)
    return missing


def install_dependencies(missing):
    """Install missing dependencies."""
    if not missing:
        return True
    print(f"\nInstalling missing packages: {', '.join(missing)}")
    result = subprocess.run([sys.executable, '-m', 'pip', 'install'] + missing)
    return result.returncode == 0


def setup_launcher():
    """Print how to call motiontok from anywhere."""
    script = os.path.join(SCRIPT_DIR, f"{TOOL}.py")
    if platform.system() == 'Windows':
        print("\nAdd a PowerShell alias:")
        print(f'    Add-Content $PROFILE "function {TOOL} {{ python \\"{script}\\" @args }}"')
    else:
        if os.path.exists(script):
            os.chmod(script, 0o755)
            print(f"✓ Made {TOOL}.py executable")
        print("\nTo install system-wide (requires sudo):")
        print(f"  sudo ln -sf {script} /usr/local/bin/{TOOL}")


def cmd_install(args):
    print("\n🚀 MOTIONTOK Setup")
    print("═" * 50)
    if not check_python():
        return 1
    print("\n📋 Checking dependencies...")
    missing = check_dependencies({**REQUIRED, **DEV})
    if missing and not install_dependencies(missing):
        print("❌ Failed to install dependencies")
        return 1
    setup_launcher()
    print("\n✓ Setup complete!\n")
    return 0


def cmd_check(args):
    print("\n🔍 MOTIONTOK Installation Check")
    print("═" * 50)
    print("\n📋 Python:")
    ok = check_python()
    print("\n📋 Dependencies:")
    missing = check_dependencies(REQUIRED)
    print("\n📋 Test tooling:")
    missing_dev = check_dependencies(DEV)
    if missing or missing_dev:
        print(f"\n❌ Missing packages: {', '.join(missing + missing_dev)}")
        print("   Install with: pip install -r requirements.txt")
    threads = os.environ.get("MOTIONTOK_THREADS")
    print(f"\n📋 MOTIONTOK_THREADS: {threads or 'not set (library default)'}")
    print()
    return 0 if ok and not missing else 1


def main():
    import argparse
    parser = argparse.ArgumentParser(description='MOTIONTOK Setup')
    subparsers = parser.add_subparsers(dest='command')
    subparsers.add_parser('install', help='Install dependencies and the launcher')
    subparsers.add_parser('check', help='Check installation')
    args = parser.parse_args()

    if args.command == 'install':
        return cmd_install(args)
    elif args.command == 'check':
        return cmd_check(args)
    parser.print_help()
    print("\n💡 Quick start:")
    print("   python setup.py install")
    return 0


if __name__ == '__main__':
    # Build backends (pip / setuptools.build_meta) invoke this file with
    # setuptools commands; hand those to setuptools (metadata in pyproject.toml).
    if len(sys.argv) > 1 and sys.argv[1] not in ('install', 'check', '-h', '--help'):
        from setuptools import setup
        setup()
    else:
        sys.exit(main())
