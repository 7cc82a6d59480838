#!/usr/bin/env python3
"""
Setup script for rpkit
Prepares a working directory, installs dependencies and runs a smoke check
"""

import subprocess
import sys
from pathlib import Path


def create_directories():
    """Create the report and log directories"""
    for directory in ("reports", "logs"):
        Path(directory).mkdir(parents=True, exist_ok=True)
        print(f"✓ Created directory: {directory}")
    return True


def install_dependencies():
    """Install Python dependencies"""
    print("Installing Python dependencies...")
    try:
        subprocess.run([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"], check=True)
        print("✓ Dependencies installed successfully")
    except subprocess.CalledProcessError as e:
        print(f"✗ Error installing dependencies: {e}")
        return False
    return True


def setup_environment():
    """Create .env from .env.example"""
    env_file = Path(".env")
    if env_file.exists():
        print("✓ .env file already exists")
        return True

    example_file = Path(".env.example")
    if not example_file.exists():
        print("✗ .env.example file not found")
        return False
    env_file.write_text(example_file.read_text())
    print("✓ Created .env file from .env.example")
    return True


def test_local_setup():
    """Import the modules and run the fusion checks once"""
    print("\nTesting local setup...")
    try:
        from config import validate_config
        from cli import main as rpkit

        if not validate_config():
            print("✗ Configuration is invalid")
            return False
        print("✓ All modules imported successfully")

        code = rpkit(["--out", "reports/smoke.json", "fusion", "--category", "fibonacci", "--hom", "2", "2"])
        print(f"✓ Smoke run exited with {code}")
        return code == 0
    except Exception as e:
        print(f"✗ Setup test failed: {e}")
        return False


def main():
    """Main setup function"""
    print("rpkit setup")
    print("=" * 50)

    steps = [
        ("Creating directories", create_directories),
        ("Installing dependencies", install_dependencies),
        ("Setting up environment", setup_environment),
        ("Testing setup", test_local_setup),
    ]

    success_count = 0
    for step_name, step_func in steps:
        print(f"\n📋 {step_name}...")
        try:
            if step_func():
                success_count += 1
            else:
                print(f"⚠️  {step_name} completed with warnings")
        except Exception as e:
            print(f"✗ {step_name} failed: {e}")

    print(f"\nSetup completed: {success_count}/{len(steps)} steps successful")
    if success_count == len(steps):
        print("\nNext steps:")
        print("1. Adjust tolerances in .env if needed")
        print("2. Run: python cli.py toric --L 4 --full-pipeline --out reports/toric.json")
        print("3. Run the tests: pytest")
    return 0 if success_count == len(steps) else 1


if __name__ == "__main__":
    sys.exit(main())
