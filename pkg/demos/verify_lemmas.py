"""Run every lemma verifier, then the negative control that must fail.

    python demos/verify_lemmas.py
"""

from floorpac.concentration_lab import run_suite

for rep in run_suite():
    print(rep.line())

bad = run_suite("new-mcd", inject_bug=True)[0]
print(f"negative control (exponent constant 200): {'PASS' if bad.passed else 'FAIL'} (expected FAIL)")
