"""
Diversified decoding with k-nearest-neighbour machine translation.

The library lives in the subpackages; `knnmt.management.commands` exposes it as `manage.py` commands.
"""
