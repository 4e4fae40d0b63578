# A Galerkin solve of  -div(a grad u) + u = f  on the unit sphere.
#
# Both built-in problems have exact solution u = exp(z).  Problem 2 uses
# the variable diffusion a = 1 - z/2.
from sphg import (
    assemble,
    builtin_problem,
    compute_weights,
    condition_number,
    evaluation_rule,
    fibonacci_nodes,
    icosahedral_nodes,
    relative_l2_error,
    solve,
)
from sphg.lagrange import build_global_basis

X = fibonacci_nodes(400)
Y = icosahedral_nodes(frequency=16)  # 2562 quadrature nodes
rule = compute_weights(Y, M=2)
basis = build_global_basis(X, m=3)
E = evaluation_rule(20000)

for pid in (1, 2):
    problem = builtin_problem(pid)
    A, f = assemble(basis, rule, problem)
    sol = solve(A, f, basis)
    err = relative_l2_error(sol, problem, E)
    print(f"problem {pid}: relative L2 error {err:.3e}  kappa_2 {condition_number(A):.1f}  "
          f"residual {sol.residual:.1e}")

# The solution is an ordinary function on the sphere
pts = Y.points[:3]
print("u_h at three nodes:", sol(pts).round(8))
print("exact            :", builtin_problem(2).exact_u(pts).round(8))
