#pragma once

// Real polynomials in d variables, with exact differentiation and real-root
// isolation for the univariate case.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latflow {

class Polynomial {
public:
    using Exponents = std::vector<int>;

    explicit Polynomial(int variables = 1) : vars_(variables) {
        if (variables < 1)
            throw std::invalid_argument("polynomial needs at least one variable");
    }

    /// c[0] + c[1] x + c[2] x^2 + ...
    static Polynomial univariate(std::span<const double> coeffs) {
        Polynomial p(1);
        for (std::size_t i = 0; i < coeffs.size(); ++i)
            p.add_term({static_cast<int>(i)}, coeffs[i]);
        return p;
    }

    static Polynomial univariate(std::initializer_list<double> coeffs) {
        const std::vector<double> c(coeffs);
        return univariate(std::span<const double>(c));
    }

    /// Plain-text form: one monomial per line, "exponent-tuple coefficient".
    /// The tuple may be written "2 0", "2,0" or "(2,0)"; '#' starts a comment.
    static Polynomial parse(std::istream& in) {
        std::string line;
        int vars = -1;
        std::vector<std::pair<Exponents, double>> terms;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            for (char& ch : line)
                if (ch == '(' || ch == ')' || ch == ',')
                    ch = ' ';
            std::istringstream fields(line);
            std::vector<std::string> tokens;
            for (std::string tok; fields >> tok;)
                tokens.push_back(tok);
            if (tokens.empty())
                continue;
            if (tokens.size() < 2)
                throw std::invalid_argument("polynomial line " + std::to_string(lineno) +
                                            ": expected exponents and a coefficient");
            Exponents e;
            for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
                std::size_t used = 0;
                const int v = std::stoi(tokens[i], &used);
                if (used != tokens[i].size() || v < 0)
                    throw std::invalid_argument("polynomial line " + std::to_string(lineno) + ": bad exponent");
                e.push_back(v);
            }
            std::size_t used = 0;
            const double c = std::stod(tokens.back(), &used);
            if (used != tokens.back().size())
                throw std::invalid_argument("polynomial line " + std::to_string(lineno) + ": bad coefficient");
            if (vars < 0)
                vars = static_cast<int>(e.size());
            if (static_cast<int>(e.size()) != vars)
                throw std::invalid_argument("polynomial line " + std::to_string(lineno) + ": arity mismatch");
            terms.emplace_back(std::move(e), c);
        }
        if (vars < 0)
            throw std::invalid_argument("polynomial text has no monomials");
        Polynomial p(vars);
        for (auto& [e, c] : terms)
            p.add_term(e, c);
        return p;
    }

    static Polynomial parse(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    std::string to_text() const {
        std::ostringstream out;
        out.precision(17);
        for (const auto& [e, c] : terms_) {
            for (int v : e)
                out << v << ' ';
            out << c << '\n';
        }
        return out.str();
    }

    void add_term(const Exponents& e, double c) {
        if (static_cast<int>(e.size()) != vars_)
            throw std::invalid_argument("monomial arity does not match polynomial");
        if (c == 0)
            return;
        auto& slot = terms_[e];
        slot += c;
        if (slot == 0)
            terms_.erase(e);
    }

    int variables() const { return vars_; }
    const std::map<Exponents, double>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& [e, c] : terms_) {
            int s = 0;
            for (int v : e)
                s += v;
            d = std::max(d, s);
        }
        return d;
    }

    double operator()(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != vars_)
            throw std::invalid_argument("polynomial evaluated at point of wrong dimension");
        if (vars_ == 1)
            return horner(x[0]);
        double total = 0;
        for (const auto& [e, c] : terms_) {
            double term = c;
            for (int i = 0; i < vars_; ++i)
                for (int p = 0; p < e[static_cast<std::size_t>(i)]; ++p)
                    term *= x[static_cast<std::size_t>(i)];
            total += term;
        }
        return total;
    }

    double operator()(double x) const {
        const double pt[1] = {x};
        return (*this)(std::span<const double>(pt, 1));
    }

    Polynomial derivative(int var, int order = 1) const {
        if (var < 0 || var >= vars_)
            throw std::invalid_argument("derivative variable out of range");
        Polynomial out(vars_);
        for (const auto& [e, c] : terms_) {
            const int p = e[static_cast<std::size_t>(var)];
            if (p < order)
                continue;
            double factor = c;
            for (int i = 0; i < order; ++i)
                factor *= p - i;
            Exponents ne = e;
            ne[static_cast<std::size_t>(var)] -= order;
            out.add_term(ne, factor);
        }
        return out;
    }

    /// Partial derivative along a multi-index beta.
    Polynomial partial(std::span<const int> beta) const {
        Polynomial out = *this;
        for (int i = 0; i < static_cast<int>(beta.size()); ++i)
            if (beta[static_cast<std::size_t>(i)] > 0)
                out = out.derivative(i, beta[static_cast<std::size_t>(i)]);
        return out;
    }

    /// Coefficient list c_0..c_deg (univariate only).
    std::vector<double> coefficients() const {
        if (vars_ != 1)
            throw std::logic_error("coefficients() requires a univariate polynomial");
        std::vector<double> c(static_cast<std::size_t>(degree()) + 1, 0.0);
        for (const auto& [e, v] : terms_)
            c[static_cast<std::size_t>(e[0])] = v;
        return c;
    }

private:
    double horner(double x) const {
        const auto c = coefficients();
        double acc = 0;
        for (auto it = c.rbegin(); it != c.rend(); ++it)
            acc = acc * x + *it;
        return acc;
    }

    int vars_;
    std::map<Exponents, double> terms_;
};

/// Real roots of a univariate polynomial in [lo, hi], isolated between the
/// critical points (found recursively) and refined by bisection.
inline std::vector<double> real_roots(const Polynomial& p, double lo, double hi) {
    if (p.variables() != 1)
        throw std::invalid_argument("real_roots requires a univariate polynomial");
    if (p.is_zero() || p.degree() == 0)
        return {};
    std::vector<double> knots{lo};
    for (double c : real_roots(p.derivative(0), lo, hi))
        if (c > knots.back())
            knots.push_back(c);
    knots.push_back(hi);
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        double a = knots[i], b = knots[i + 1];
        double fa = p(a), fb = p(b);
        if (fa == 0) {
            if (roots.empty() || roots.back() != a)
                roots.push_back(a);
            continue;
        }
        if (fb == 0 || (fa < 0) == (fb < 0))
            continue;
        for (int iter = 0; iter < 200 && b - a > 0; ++iter) {
            const double m = 0.5 * (a + b);
            if (m <= a || m >= b)
                break;
            const double fm = p(m);
            if (fm == 0) {
                a = b = m;
                break;
            }
            if ((fm < 0) == (fa < 0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        roots.push_back(0.5 * (a + b));
    }
    if (p(hi) == 0 && (roots.empty() || roots.back() != hi))
        roots.push_back(hi);
    return roots;
}

} // namespace latflow
