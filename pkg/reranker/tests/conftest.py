import sys
from pathlib import Path

# let test modules share the synthetic fixture helpers in synth.py
sys.path.insert(0, str(Path(__file__).parent))
