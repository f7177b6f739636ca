import pytest

from gecvalid.synthetic import make_synthetic_corpus


CHAIN_BOTTOM = (
    "Social media makes our life patten so fast and left us less time to think about our life ."
)
CHAIN_TOP = (
    "Social media make our pace of life so fast and leave us less time to think about our life ."
)

SMALL_M2 = """S I want book
A 2 2|||ArtOrDet|||a|||REQUIRED|||-NONE-|||0
A 2 3|||Nn|||books|||REQUIRED|||-NONE-|||1

S the dog dog barks
A 0 1|||Mec|||The|||REQUIRED|||-NONE-|||0
A 1 2|||Rloc-|||-NONE-|||REQUIRED|||-NONE-|||0
A 2 3|||Nn|||dogs|||REQUIRED|||-NONE-|||1
"""


@pytest.fixture(scope="session")
def small_corpus():
    from gecvalid.corpus import parse_m2

    return parse_m2(SMALL_M2)


@pytest.fixture(scope="session")
def synth_corpus():
    return make_synthetic_corpus(20, seed=11)


@pytest.fixture(scope="session")
def acceptance_corpus():
    # 50 sentences, 2 annotations each, 1..6 edits per annotation
    return make_synthetic_corpus(50, seed=7)
