from __future__ import annotations

from pathlib import Path

import pytest

from solsearch.frontend import TokenCaps, build_vocabulary, extract_functions
from solsearch.nn.params import ModelConfig

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def vault_source() -> str:
    return (FIXTURES / "withdraw_vault.sol").read_text()


@pytest.fixture(scope="session")
def vault_units(vault_source):
    return extract_functions(vault_source, "withdraw_vault.sol")


@pytest.fixture(scope="session")
def withdraw_unit(vault_units):
    return next(u for u in vault_units if u.name == "withdraw")


@pytest.fixture()
def tiny_config() -> ModelConfig:
    return ModelConfig(
        embed_dim=8,
        text_heads=2,
        graph_heads=2,
        out_dim=16,
        max_tokens=32,
        max_name_words=6,
        max_api_words=8,
        max_graph_nodes=8,
    )


@pytest.fixture()
def tiny_caps(tiny_config) -> TokenCaps:
    return TokenCaps(
        tiny_config.max_tokens,
        tiny_config.max_name_words,
        tiny_config.max_api_words,
    )


@pytest.fixture(scope="session")
def small_vocab():
    corpus = [
        "destroy tokens of a certain address",
        "withdraw the caller balance",
        "mint fresh supply",
        ["amount", "deposits", "msg", "sender", "transfer", "withdraw",
         "balance", "value", "uint", "if", "require"],
    ]
    return build_vocabulary(corpus, min_count=1)
