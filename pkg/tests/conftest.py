import pathlib
import sys

# Let the suite run straight from a checkout, installed or not.
SRC = pathlib.Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))
