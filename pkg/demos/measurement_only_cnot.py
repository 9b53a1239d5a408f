"""Compile a short Clifford program into Pauli-product measurements and check it."""

from __future__ import annotations

from ftbench.frame import compile_program, compiled_distribution, direct_distribution

PROGRAM = [("H", 1), ("H", 2), ("S", 2), ("CNOT", 1, 2), ("MEASURE", "ZZ", 1, 2), ("MEASURE", "X", 1)]


def main() -> None:
    compiled = compile_program(PROGRAM)
    print("ancillas:", compiled.ancillas)
    for req in compiled.requests:
        deps = f" x outcomes{sorted(req.deps)}" if req.deps else ""
        print(f"  measure {req}{deps}  loops={req.loops()}")
    got, want = compiled_distribution(compiled), direct_distribution(PROGRAM)
    print("distribution:", {k: str(v) for k, v in got.items()})
    print("matches direct simulation:", got == want)


if __name__ == "__main__":
    main()
