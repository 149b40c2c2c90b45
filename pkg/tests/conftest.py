import sys
from pathlib import Path

# make shared test helpers (oracle, sql_corpus) importable
sys.path.insert(0, str(Path(__file__).parent))
