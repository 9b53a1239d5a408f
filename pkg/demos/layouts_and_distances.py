"""Build the small reference layouts and print their counts and distances."""

from __future__ import annotations

from ftbench.lattice import GeometrySpec, build_layout, code_distance, figure1_spec, figure2_spec, find_logicals


def describe(name: str, spec: GeometrySpec) -> None:
    layout = build_layout(spec)
    line = (f"{name:28s} qubits={layout.n_qubits:4d} stabilizers={layout.n_stabilizers:4d} "
            f"rank={layout.rank:4d} logical={layout.logical_qubit_count}")
    if layout.logical_qubit_count:
        line += f" distance={int(code_distance(layout))}"
    print(line)


def main() -> None:
    describe("corner-stabilizer patch", figure1_spec())
    describe("boundary patch", figure2_spec())
    for L in (3, 5, 7):
        describe(f"aligned patch L={L}", GeometrySpec("patch_square", L))
    for L in (3, 4):
        describe(f"dislocation patch L={L}", GeometrySpec("dislocation_patch", L))
    (pair,) = find_logicals(build_layout(figure2_spec()), minimize=True)
    print("boundary patch logicals:", pair.x, pair.z)


if __name__ == "__main__":
    main()
