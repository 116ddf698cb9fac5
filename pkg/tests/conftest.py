import functools

import numpy as np
import pytest

from touchintent.config import load_config
from touchintent.simgen import build_corpus, corpus_mix, corpus_specs, spec_defaults


@functools.lru_cache(maxsize=None)
def demo_env():
    return load_config()


@functools.lru_cache(maxsize=None)
def demo_corpus(seed):
    env = demo_env()
    return build_corpus(corpus_specs(seed, corpus_mix(env), **spec_defaults(env)), env)


@pytest.fixture(scope="session")
def env():
    return demo_env()


@pytest.fixture(scope="session")
def corpus():
    """(dataset, scaling, traces, summary) for the default corpus with seed 1."""
    return demo_corpus(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
