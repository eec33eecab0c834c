"""Deterministic seed derivation for experiment jobs."""

import hashlib

from ..errors import ConfigurationError


def seed_stream(master_seed, path):
    """64-bit seed for a labeled job under a master seed.

    The derivation is byte-exact so runs reproduce anywhere: SHA-256
    over the master seed as an 8-byte little-endian word, followed by
    each label as a 4-byte little-endian length prefix plus its UTF-8
    bytes.  The first 8 digest bytes, read little-endian, are the seed.
    Length-prefixed labels make the encoding injective, so distinct
    paths collide only with negligible probability and label order
    matters.

    Parameters
    ----------
    master_seed : int
        Experiment master seed, 0 <= seed < 2**64.
    path : sequence of str
        Non-empty list of job labels, e.g. ["train", "recurrent"].
    """
    labels = list(path)
    if not labels:
        raise ConfigurationError("seed_stream needs at least one label")
    master = int(master_seed)
    if not 0 <= master < 2 ** 64:
        raise ConfigurationError(
            "master seed must fit an unsigned 64-bit integer, got %r"
            % master_seed)
    h = hashlib.sha256()
    h.update(master.to_bytes(8, "little"))
    for label in labels:
        raw = str(label).encode("utf-8")
        h.update(len(raw).to_bytes(4, "little"))
        h.update(raw)
    return int.from_bytes(h.digest()[:8], "little")
