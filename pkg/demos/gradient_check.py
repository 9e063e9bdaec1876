# Finite-difference gradient checks
#
# Every analytic gradient in the package is compared with central
# differences on small random instances.

from hnnso import gradcheck

worst = gradcheck.run_all(n_seeds=5)
for name, err in worst.items():
    print(f"{name:24s} {err:.2e}")
print("step", gradcheck.STEP, "floor", gradcheck.FLOOR)
