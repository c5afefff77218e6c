"""Deterministic synthetic Solidity corpus for training and evaluation.

Generates templated token-ledger functions (transfers, mints, burns,
withdrawals, guards, loops) whose docstrings describe them in aligned
vocabulary. Each unit carries a distinguishing asset + denomination word
pair that appears in its name and its docstring, so retrieval quality is
learnable at desk scale. Every unit round-trips through function
extraction and graph construction.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Sequence

from .frontend import FunctionUnit, extract_functions, write_corpus

__all__ = ["generate_synthetic_corpus", "write_synthetic_corpus"]

_ASSETS = [
    "gold", "silver", "copper", "bronze", "iron", "steel", "cobalt", "nickel",
    "amber", "pearl", "ruby", "opal", "quartz", "topaz", "jade", "onyx",
    "agate", "coral", "garnet", "jasper", "ivory", "maple", "cedar", "aspen",
    "lotus", "tulip", "orchid", "violet", "saffron", "indigo", "crimson",
    "azure", "ember", "frost", "storm", "comet", "nova", "quasar", "zephyr",
    "prism",
]

_SUFFIXES = ["coin", "token", "share", "credit", "point", "stake", "bond", "chip"]

_TEMPLATES = [
    {
        "family": "transfer",
        "verbs": ["transfer", "send", "move"],
        "doc": [
            "{verb} {asset} {suffix} holdings to a recipient wallet",
            "pass {asset} {suffix} from the caller to another account",
            "{verb} an amount of {asset} {suffix} to a target address",
        ],
        "body": (
            "        require(balances[msg.sender] >= _value);\n"
            "        balances[msg.sender] -= _value;\n"
            "        balances[_to] += _value;\n"
            "        emit Moved(_to, _value);\n"
        ),
        "params": "address _to, uint256 _value",
    },
    {
        "family": "mint",
        "verbs": ["mint", "issue", "create"],
        "doc": [
            "{verb} new {asset} {suffix} for an account",
            "{verb} fresh {asset} {suffix} supply",
            "grow the {asset} {suffix} pool by minting to an address",
        ],
        "body": (
            "        require(msg.sender == owner);\n"
            "        totalSupply += _value;\n"
            "        balances[_to] += _value;\n"
        ),
        "params": "address _to, uint256 _value",
    },
    {
        "family": "burn",
        "verbs": ["burn", "destroy", "scrap"],
        "doc": [
            "{verb} {asset} {suffix} held by an address",
            "{verb} an amount of {asset} {suffix} from circulation",
            "shrink {asset} {suffix} supply by burning",
        ],
        "body": (
            "        require(balances[_from] >= _value);\n"
            "        balances[_from] -= _value;\n"
            "        totalSupply -= _value;\n"
        ),
        "params": "address _from, uint256 _value",
    },
    {
        "family": "withdraw",
        "verbs": ["withdraw", "redeem", "claim"],
        "doc": [
            "{verb} deposited {asset} {suffix} back to the caller",
            "{verb} the caller's stored {asset} {suffix}",
            "cash out {asset} {suffix} deposits",
        ],
        "body": (
            "        uint256 amount = balances[msg.sender];\n"
            "        if (amount > 0) {\n"
            "            balances[msg.sender] = 0;\n"
            "            msg.sender.transfer(amount);\n"
            "        }\n"
        ),
        "params": "",
    },
    {
        "family": "deposit",
        "verbs": ["deposit", "store", "stake"],
        "doc": [
            "{verb} incoming {asset} {suffix} for the sender",
            "record a {asset} {suffix} {verb} by the caller",
            "lock {asset} {suffix} value into the vault",
        ],
        "body": (
            "        balances[msg.sender] += msg.value;\n"
            "        totalSupply += msg.value;\n"
        ),
        "params": "",
    },
    {
        "family": "approve",
        "verbs": ["approve", "allow", "permit"],
        "doc": [
            "{verb} a spender to use {asset} {suffix}",
            "{verb} an allowance of {asset} {suffix} for a delegate",
            "grant {asset} {suffix} spending rights",
        ],
        "body": (
            "        allowance[msg.sender] = _value;\n"
            "        emit Approval(_spender, _value);\n"
        ),
        "params": "address _spender, uint256 _value",
    },
    {
        "family": "balance",
        "verbs": ["check", "read", "query"],
        "doc": [
            "{verb} the {asset} {suffix} balance of a holder",
            "{verb} how much {asset} {suffix} an address owns",
            "look up {asset} {suffix} holdings",
        ],
        "body": (
            "        uint256 current = balances[_holder];\n"
            "        require(current >= 0);\n"
            "        return current;\n"
        ),
        "params": "address _holder",
        "returns": " returns (uint256)",
    },
    {
        "family": "sweep",
        "verbs": ["sum", "tally", "count"],
        "doc": [
            "{verb} {asset} {suffix} balances over a list of holders",
            "{verb} the total {asset} {suffix} held by several accounts",
            "aggregate {asset} {suffix} across wallets",
        ],
        "body": (
            "        uint256 total = 0;\n"
            "        for (uint256 i = 0; i < _holders.length; i++) {\n"
            "            total += balances[_holders[i]];\n"
            "        }\n"
            "        return total;\n"
        ),
        "params": "address[] _holders",
        "returns": " returns (uint256)",
    },
]


def _function_name(rng: random.Random, verb: str, asset: str, suffix: str) -> str:
    if rng.random() < 0.5:
        return f"{verb}{asset.capitalize()}{suffix.capitalize()}"
    return f"{verb}_{asset}_{suffix}"


def generate_synthetic_corpus(n: int, seed: int) -> list[FunctionUnit]:
    """Exactly ``n`` documented units, deterministic per seed."""
    if n < 2:
        raise ValueError("a corpus needs at least 2 units")
    rng = random.Random(seed)
    combos = [
        (t_idx, a_idx, s_idx)
        for a_idx in range(len(_ASSETS))
        for t_idx in range(len(_TEMPLATES))
        for s_idx in range(len(_SUFFIXES))
    ]
    rng.shuffle(combos)
    units: list[FunctionUnit] = []
    for i in range(n):
        t_idx, a_idx, s_idx = combos[i % len(combos)]
        template = _TEMPLATES[t_idx]
        asset = _ASSETS[a_idx]
        suffix = _SUFFIXES[s_idx]
        if i >= len(combos):  # cycle with a disambiguating suffix
            asset = f"{asset}{i // len(combos) + 1}"
        verb = rng.choice(template["verbs"])
        name = _function_name(rng, verb, asset, suffix)
        doc = rng.choice(template["doc"]).format(
            verb=verb, asset=asset, suffix=suffix
        )
        returns = template.get("returns", "")
        params = template["params"]
        source = (
            f"pragma solidity ^0.4.24;\n\n"
            f"contract {asset.capitalize()}{template['family'].capitalize()} {{\n"
            f"    mapping (address => uint256) balances;\n"
            f"    mapping (address => uint256) allowance;\n"
            f"    uint256 totalSupply;\n"
            f"    address owner;\n\n"
            f"    /// {doc}\n"
            f"    function {name}({params}) public{returns} {{\n"
            f"{template['body']}"
            f"    }}\n"
            f"}}\n"
        )
        path = f"synthetic/{i:04d}.sol"
        extracted = [
            u for u in extract_functions(source, path) if u.kind == "function"
        ]
        assert len(extracted) == 1, f"template {template['family']} broke extraction"
        units.append(extracted[0])
    return units


def write_synthetic_corpus(n: int, seed: int, path: str | Path) -> int:
    return write_corpus(generate_synthetic_corpus(n, seed), path)
