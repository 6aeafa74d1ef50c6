#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with tiling related helper functions for dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      splitting a trial range into independently seeded tiles
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

from dataclasses import dataclass

import numpy as np

from .messages import message
from .validation import check_positive


@dataclass(frozen=True)
class TrialTile:
    """A contiguous range of trials with its own seed sequence."""

    index: int
    start: int
    n_trials: int
    seed_sequence: np.random.SeedSequence

    @property
    def stop(self):
        return self.start + self.n_trials

    def rng(self):
        return np.random.default_rng(self.seed_sequence)


def create_trial_tiles(n_trials, tile_size, master_seed):
    """Create the tiles for a trial range.

    The seed of a tile depends only on the master seed and the tile index,
    so results do not depend on the number of processes.

    Args:
        n_trials (int): total number of trials
        tile_size (int): trials per tile (the last tile may be smaller)
        master_seed (int): master seed of the run
    Returns:
        (list): TrialTile objects

    """
    n_trials = int(check_positive("n_trials", n_trials))
    tile_size = int(check_positive("tile_size", tile_size))
    n_tiles = -(-n_trials // tile_size)
    message(f"Creating {n_tiles} tile(s) for {n_trials} trials ...")
    tiles = []
    for index in range(n_tiles):
        start = index * tile_size
        tiles.append(
            TrialTile(
                index=index,
                start=start,
                n_trials=min(tile_size, n_trials - start),
                seed_sequence=np.random.SeedSequence(master_seed, spawn_key=(index,)),
            ),
        )
    return tiles
