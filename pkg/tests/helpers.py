"""Small builders shared by tests."""

from taintvm.corpus import assemble
from taintvm.evm.frame import CallKind, CallRequest
from taintvm.harness import Config, Executor, run_code
from taintvm.state import WorldState

CONTRACT = 0xC0DE
SENDER = 0xE0A


def asm(text: str) -> bytes:
    return assemble(text)


def run_asm(text: str, calldata: bytes = b"", **config):
    """Assemble ``text``, deploy it at CONTRACT and call it once."""
    return run_code(asm(text), calldata, config=Config(**config))


def open_frame(code: bytes, calldata: bytes = b"", *, taint: bool = True, world=None):
    """An executor plus a ready top-level frame for stepping by hand."""
    world = world or WorldState()
    world.create_account(SENDER, balance=10**18)
    world.set_code(CONTRACT, code)
    ex = Executor(world, Config(taint=taint))
    frame = ex.open_call(CallRequest(CallKind.CALL, CONTRACT, 0, calldata, 10_000_000),
                         depth=0, sender=SENDER)
    return ex, frame


def word(value: int) -> bytes:
    return value.to_bytes(32, "big")


# -- random programs --------------------------------------------------------------
#
# Argument kinds, top of stack first: "v" any value (often a DUP of an earlier
# result so taints flow), "o" a small memory offset, "s" a small size, "k" a
# storage slot.

_OPS = {
    **{name: "vv" for name in ("ADD", "MUL", "SUB", "DIV", "MOD", "EXP", "LT", "GT", "EQ",
                               "AND", "OR", "XOR", "BYTE", "SHL", "SHR")},
    "ISZERO": "v", "NOT": "v", "BALANCE": "v",
    "KECCAK256": "os", "MLOAD": "o", "MSTORE": "ov", "MSTORE8": "ov",
    "CALLDATALOAD": "o", "CALLDATACOPY": "oos", "CODECOPY": "oos",
    "ADDRESS": "", "CALLER": "", "CALLVALUE": "", "CALLDATASIZE": "", "CODESIZE": "",
    "RETURNDATASIZE": "", "PC": "", "MSIZE": "", "GAS": "",
    "LOG0": "os", "LOG2": "osvv",
}
_PUSHES = {"CALLDATACOPY": 0, "CODECOPY": 0, "MSTORE": 0, "MSTORE8": 0, "LOG0": 0, "LOG2": 0}


def random_program(rng, length: int, *, storage: bool = True, callee=None) -> str:
    """Assembly text of a random terminating program.

    Every JUMPI lands on the very next instruction, so both branches agree
    on stack depth and the generator can track it statically.
    """
    lines = []
    depth = 0
    labels = 0

    def arg(kind: str) -> None:
        nonlocal depth
        if kind == "v" and depth and rng.random() < 0.6:
            lines.append(f"DUP{rng.randint(1, min(depth, 16))}")
        elif kind == "v":
            lines.append(f"PUSH {rng.choice((0, 1, 2, 31, 255, rng.getrandbits(256)))}")
        elif kind == "o":
            lines.append(f"PUSH {rng.randrange(160)}")
        elif kind == "s":
            lines.append(f"PUSH {rng.randrange(65)}")
        elif kind == "k" and depth and rng.random() < 0.3:
            lines.append(f"DUP{rng.randint(1, min(depth, 16))}")
        else:
            lines.append(f"PUSH {rng.randrange(4)}")
        depth += 1

    def emit(name: str, kinds: str, pushes: int = 1) -> None:
        nonlocal depth
        for kind in reversed(kinds):
            arg(kind)
        lines.append(name)
        depth += pushes - len(kinds)

    choices = list(_OPS) + ["POP", "SWAP", "JUMPI"]
    if storage:
        choices += ["SLOAD", "SLOAD", "SSTORE"]
    if callee is not None:
        choices += ["CALL"]
    for _ in range(length):
        if depth > 900:
            lines.append("POP")
            depth -= 1
            continue
        name = rng.choice(choices)
        if name == "POP":
            if depth:
                lines.append("POP")
                depth -= 1
        elif name == "SWAP":
            if depth >= 2:
                lines.append(f"SWAP{rng.randint(1, min(depth - 1, 16))}")
        elif name == "JUMPI":
            arg("v")
            lines += [f"JUMPI @j{labels}", f"j{labels}:", "JUMPDEST"]
            depth -= 1
            labels += 1
        elif name == "SLOAD":
            emit("SLOAD", "k")
        elif name == "SSTORE":
            emit("SSTORE", "kv", 0)
        elif name == "CALL":
            # out_size, out_off, in_size, in_off, value, target, gas
            for kind in "sosoo":
                arg(kind)
            lines[-1] = "PUSH 0"  # no value moves
            lines += [f"PUSH {callee}", "PUSH 100000", "CALL"]
            depth += 2 - 7 + 1
        else:
            emit(name, _OPS[name], _PUSHES.get(name, 1))
    if rng.random() < 0.5:
        lines += [f"PUSH {rng.randrange(65)}", f"PUSH {rng.randrange(160)}", "RETURN"]
    else:
        lines.append("STOP")
    return "\n".join(lines)


def random_call_tree(rng, max_nodes: int = 50, contexts: int = 5, slots: int = 4):
    """A random enter/exit event sequence as (kind, node or parent, ctx, D, reverted)."""
    n = rng.randint(1, max_nodes - 1)  # non-root nodes
    events = []
    open_nodes = [0]
    made = 0
    while made < n or len(open_nodes) > 1:
        if made < n and (len(open_nodes) == 1 or rng.random() < 0.55):
            made += 1
            ctx = rng.randrange(contexts)
            events.append(("enter", open_nodes[-1], ctx, None, None))
            open_nodes.append(made)
        else:
            node = open_nodes.pop()
            d = {(rng.randrange(contexts), rng.randrange(slots))
                 for _ in range(rng.choice((0, 1, 1, 2, 3)))}
            events.append(("exit", node, None, d, rng.random() < 0.2))
    return events
