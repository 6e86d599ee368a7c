import logging
from typing import Callable, Dict, List

import sympy

logger = logging.getLogger(__name__)


class SymbolicAnalyzer:
    """
    Closed forms for the degree-two covering and the algebraic identities
    that the numerical checks rely on.

    For branch points λ₁, λ₂ the map is

        R(γ) = γ + (λ₁−λ₂)²/(16(γ − (λ₁+λ₂)/2)),

    with critical points γ₁ = (3λ₁+λ₂)/4, γ₂ = (λ₁+3λ₂)/4 and
    α₁ = −α₂ = (λ₁−λ₂)/8.
    """
    def __init__(self):
        self.l1, self.l2 = sympy.symbols("lambda1 lambda2")
        self.gamma = sympy.Symbol("gamma")
        self.pole = (self.l1 + self.l2) / 2
        self.residue = (self.l1 - self.l2) ** 2 / 16
        self.R = self.gamma + self.residue / (self.gamma - self.pole)

    def degree_two_critical_data(self) -> Dict[str, List[sympy.Expr]]:
        gammas = [(3 * self.l1 + self.l2) / 4, (self.l1 + 3 * self.l2) / 4]
        alphas = [(self.l1 - self.l2) / 8, (self.l2 - self.l1) / 8]
        return {"gammas": gammas, "alphas": alphas, "lambdas": [self.l1, self.l2]}

    def verify_degree_two(self) -> bool:
        """R'(γ_m) = 0, R(γ_m) = λ_m and α_m = 1/R''(γ_m) hold identically."""
        data = self.degree_two_critical_data()
        first = sympy.diff(self.R, self.gamma)
        second = sympy.diff(self.R, self.gamma, 2)
        for g, a, l in zip(data["gammas"], data["alphas"], data["lambdas"]):
            checks = [first.subs(self.gamma, g), self.R.subs(self.gamma, g) - l,
                      a - 1 / second.subs(self.gamma, g)]
            if any(sympy.simplify(c) != 0 for c in checks):
                return False
        return True

    def partial_fraction_defect(self) -> sympy.Expr:
        """1/R'(γ) − 1 − Σ α_n/(γ−γ_n), which simplifies to zero."""
        data = self.degree_two_critical_data()
        expr = 1 / sympy.diff(self.R, self.gamma) - 1 - sum(
            a / (self.gamma - g) for g, a in zip(data["gammas"], data["alphas"]))
        return sympy.simplify(expr)

    def deformation_defects(self) -> List[sympy.Expr]:
        """
        Differentiates the closed forms and subtracts the deformation
        equations for γ_m and α_m; every entry simplifies to zero.
        """
        data = self.degree_two_critical_data()
        g, a, l = data["gammas"], data["alphas"], data["lambdas"]
        defects = []
        for m in range(2):
            n = 1 - m
            defects.append(sympy.diff(g[m], l[n]) - a[n] / (g[n] - g[m]))
            defects.append(sympy.diff(g[m], l[m]) - (1 + a[n] / (g[m] - g[n])))
            defects.append(sympy.diff(a[m], l[n]) - 2 * a[n] * a[m] / (g[n] - g[m]) ** 2)
        return [sympy.simplify(d) for d in defects]

    def genus_reduction_defect(self) -> sympy.Expr:
        """
        (b_mn/2)(v_n/v_m) − α_n(γ_m−γ₀)/((γ_m−γ_n)²(γ_n−γ₀)) with
        b_mn = κ_mκ_n/(γ_m−γ_n)², v_m = κ_m/(γ_m−γ₀) and α_n = κ_n²/2.
        """
        km, kn, gm, gn, g0 = sympy.symbols("kappa_m kappa_n gamma_m gamma_n gamma_0")
        b = km * kn / (gm - gn) ** 2
        vm, vn = km / (gm - g0), kn / (gn - g0)
        alpha_n = kn ** 2 / 2
        return sympy.simplify(b / 2 * vn / vm - alpha_n * (gm - g0) / ((gm - gn) ** 2 * (gn - g0)))

    def euler_darboux_defect(self) -> sympy.Expr:
        """The kernel 1/√((λ−ξ)(λ−ξ̄)) solves f_ξξ̄ = (f_ξ − f_ξ̄)/(2(ξ−ξ̄))."""
        lam, xi, xb = sympy.symbols("lambda xi xibar")
        f = (lam - xi) ** sympy.Rational(-1, 2) * (lam - xb) ** sympy.Rational(-1, 2)
        expr = sympy.diff(f, xi, xb) - (sympy.diff(f, xi) - sympy.diff(f, xb)) / (2 * (xi - xb))
        return sympy.simplify(expr)

    def beta_closed_form(self) -> sympy.Expr:
        """β₁₂ squared for the degree-two covering: α₁α₂/(γ₁−γ₂)⁴."""
        data = self.degree_two_critical_data()
        g, a = data["gammas"], data["alphas"]
        return sympy.simplify(a[0] * a[1] / (g[0] - g[1]) ** 4)

    def get_numeric_function(self, expression: sympy.Expr, args: List[sympy.Symbol]) -> Callable:
        """
        Converts a symbolic expression into a numeric function using sympy.lambdify.
        :param expression: The sympy expression (or Matrix) to convert.
        :param args: The sympy.Symbol arguments of the returned function.
        :return: A callable taking numeric values for 'args'.
        """
        if not all(isinstance(arg, sympy.Symbol) for arg in args):
            raise TypeError("All arguments in 'args' must be sympy.Symbol objects.")
        missing = set(getattr(expression, "free_symbols", set())) - set(args)
        if missing:
            raise ValueError(f"Expression depends on symbols not listed in args: {sorted(map(str, missing))}")
        return sympy.lambdify(args, expression, modules="numpy")
