import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Pin the worker count before the package caches it, so chunked-kernel
# numerics and pinned iteration counts are stable across hosts.
os.environ.setdefault("SPMVTUNE_WORKERS", "4")
