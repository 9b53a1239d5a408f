"""Generate the eight-round syndrome circuit, verify it, then break it on purpose."""

from __future__ import annotations

from ftbench.circuits import generate_syndrome_circuit, verify_syndrome_circuit
from ftbench.lattice import GeometrySpec, build_layout


def main() -> None:
    layout = build_layout(GeometrySpec("patch_square", 5))
    circuit = generate_syndrome_circuit(layout)
    print(f"{circuit.count('CNOT')} CNOTs, {circuit.count('H')} H, {len(circuit.rounds)} rounds")
    print("verified:", verify_syndrome_circuit(circuit, layout).to_json()["passed"])
    stab = next(s for s, roles in circuit.roles.items() if len(roles) == 4)
    for r1, r2 in ((1, 6), (3, 4)):
        report = verify_syndrome_circuit(circuit.swap_rounds(stab, r1, r2), layout)
        print(f"swap rounds {r1 + 1}<->{r2 + 1} of stabilizer {stab}: tableau={report.tableau_ok} "
              f"ordering={report.ordering_ok} schedule={report.schedule_ok}")


if __name__ == "__main__":
    main()
