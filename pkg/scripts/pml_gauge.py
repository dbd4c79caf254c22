"""Reflection of graded CPML layers against a doubled-domain reference."""

from woodpile.fdtd import PEC, PMLSpec, pml_reflection_test

if __name__ == "__main__":
    for label, spec in (("PEC wall", PEC), ("CPML 8", PMLSpec(8)), ("CPML 16", PMLSpec(16))):
        print(f"{label:9s} {pml_reflection_test(pml=spec):7.1f} dB")
