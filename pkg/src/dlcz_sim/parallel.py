#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with parallel related helper functions for dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      running trial tiles in a process pool, collecting worker
#               errors and merging per-tile counts
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import traceback
from collections import Counter
from multiprocessing import Pool

from .errors import DlczSimError
from .messages import fatal, message, verbose


def _run_tile(args):
    func, tile = args
    try:
        return tile.index, True, func(tile)
    except Exception:
        return tile.index, False, traceback.format_exc()


def check_parallel_errors(results):
    """Abort with one error if any worker failed.

    Args:
        results (list): (tile index, success, payload or traceback) tuples

    """
    failed = [(index, payload) for index, success, payload in results if not success]
    if failed:
        details = "\n".join(f"tile {index}: {payload.strip()}" for index, payload in failed)
        fatal(f"\nERROR processing {len(failed)} tile(s):\n{details}", DlczSimError)


def run_tiles_parallel(func, tiles, nprocs, parallel=True):
    """Run func on every tile, in a process pool if parallel.

    Args:
        func (callable): picklable function taking one tile
        tiles (list): TrialTile objects
        nprocs (int): number of processes
        parallel (bool): use a process pool
    Returns:
        (list): results of func in tile order

    """
    tiles = list(tiles)
    for tile in tiles:
        verbose(f"Queueing tile {tile.index} with {tile.n_trials} trials ...")
    if parallel and nprocs > 1 and len(tiles) > 1:
        with Pool(processes=min(nprocs, len(tiles))) as pool:
            results = pool.map(_run_tile, [(func, tile) for tile in tiles])
    else:
        results = [_run_tile((func, tile)) for tile in tiles]
    check_parallel_errors(results)
    message(f"Processed {len(tiles)} tile(s)")
    return [payload for _, _, payload in sorted(results, key=lambda item: item[0])]


def map_parallel(func, items, nprocs=1):
    """Order preserving map over a process pool."""
    items = list(items)
    if nprocs > 1 and len(items) > 1:
        with Pool(processes=min(nprocs, len(items))) as pool:
            return pool.map(func, items)
    return [func(item) for item in items]


def merge_counts(count_dicts):
    """Sum count dictionaries; the result does not depend on the order."""
    total = Counter()
    for counts in count_dicts:
        total.update(counts)
    return dict(sorted(total.items(), key=lambda item: str(item[0])))
