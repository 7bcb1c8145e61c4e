"""
Test if sketchipm's numerical components are installed correctly
"""

print("Testing sketchipm Installation...")
print("="*60)

# Test 1: numpy / scipy
print("\n1. Testing numpy and scipy...")
try:
    import numpy as np
    import scipy.sparse as sp
    import scipy.linalg
    print(f"   ✅ numpy {np.__version__}, scipy available")

    scipy.linalg.cho_factor(np.array([[4.0, 1.0], [1.0, 3.0]]))
    print("   ✅ Cholesky factorization works")

except Exception as e:
    print(f"   ❌ Error: {e}")

# Test 2: pydantic / python-dotenv
print("\n2. Testing file-format and config dependencies...")
try:
    import pydantic
    import dotenv
    print(f"   ✅ pydantic {pydantic.VERSION} and python-dotenv installed")

except Exception as e:
    print(f"   ❌ Error: {e}")

# Test 3: sketchipm solver
print("\n3. Testing sketchipm solver...")
try:
    from sketchipm.shared.config import IpmConfig
    from sketchipm.shared.models.core import LpProblem
    from sketchipm.solver.ipm.engine import ipm_solve
    print("   ✅ Solver importable")

    problem = LpProblem(a=sp.csr_matrix(np.array([[1.0]])), b=np.array([1.0]), c=np.array([1.0]))
    solution, trace = ipm_solve(problem, IpmConfig())
    print(f"   ✅ Solved 1x1 LP: objective {problem.objective(solution.x):.10f} in {trace.outer_iterations} iterations")

except Exception as e:
    print(f"   ❌ Error: {e}")

print("\n" + "="*60)
print("Installation test complete!")
print("\nIf all tests passed, you're ready to run:")
print("  python demo/sketched_ipm_demo.py")
