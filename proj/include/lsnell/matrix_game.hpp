#pragma once
#include "lsnell/errors.hpp"
#include "lsnell/rational.hpp"

#include <cstddef>
#include <vector>

namespace lsnell {

// Value and optimal mixed strategies of the zero-sum game in which the row
// player maximizes and the column player minimizes the expected payoff.
template <class T>
struct GameSolution {
    T value;
    std::vector<T> row_mix;
    std::vector<T> col_mix;
};

namespace detail {

template <class T> inline bool lp_pos(const T& v) { return v > T(0); }
template <> inline bool lp_pos<double>(const double& v) { return v > 1e-11; }
template <class T> inline bool lp_neg(const T& v) { return v < T(0); }
template <> inline bool lp_neg<double>(const double& v) { return v < -1e-11; }

// Maximizes sum(z) subject to payoff * z <= 1, z >= 0 (all payoff entries > 0)
// by a dense tableau simplex with Bland's rule; returns the primal z and the
// duals y on the slack columns. Exact for rational scalars.
template <class T>
void positive_game_lp(const std::vector<std::vector<T>>& a, std::vector<T>& z,
                      std::vector<T>& y) {
    const std::size_t m = a.size();
    const std::size_t n = a[0].size();
    const std::size_t rhs = n + m;
    std::vector<std::vector<T>> tab(m + 1, std::vector<T>(n + m + 1, T(0)));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) tab[i][j] = a[i][j];
        tab[i][n + i] = T(1);
        tab[i][rhs] = T(1);
    }
    for (std::size_t j = 0; j < n; ++j) tab[m][j] = T(-1); // reduced costs z_j - c_j
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

    const std::size_t max_iter = 50000 + 200 * (m + n);
    for (std::size_t iter = 0;; ++iter) {
        if (iter > max_iter) throw SolverError("simplex iteration cap exceeded");
        // Bland entering rule: smallest column with negative reduced cost
        std::size_t enter = rhs;
        for (std::size_t j = 0; j < rhs; ++j)
            if (lp_neg(tab[m][j])) {
                enter = j;
                break;
            }
        if (enter == rhs) break; // optimal
        // ratio test; Bland leaving rule on ties
        std::size_t leave = m;
        for (std::size_t i = 0; i < m; ++i) {
            if (!lp_pos(tab[i][enter])) continue;
            if (leave == m) {
                leave = i;
                continue;
            }
            T lhs = tab[i][rhs] * tab[leave][enter];
            T cur = tab[leave][rhs] * tab[i][enter];
            if (lhs < cur || (lhs == cur && basis[i] < basis[leave])) leave = i;
        }
        if (leave == m) throw SolverError("game linear program unbounded");
        // pivot
        T piv = tab[leave][enter];
        for (std::size_t j = 0; j <= rhs; ++j) tab[leave][j] /= piv;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == leave) continue;
            T f = tab[i][enter];
            if (f == T(0)) continue;
            for (std::size_t j = 0; j <= rhs; ++j) tab[i][j] -= f * tab[leave][j];
        }
        basis[leave] = enter;
    }
    z.assign(n, T(0));
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) z[basis[i]] = tab[i][rhs];
    y.assign(m, T(0));
    for (std::size_t i = 0; i < m; ++i) y[i] = tab[m][n + i];
}

template <class T>
GameSolution<T> solve_game_oriented(const std::vector<std::vector<T>>& payoff) {
    const std::size_t m = payoff.size();
    const std::size_t n = payoff[0].size();
    T shift = payoff[0][0];
    for (const auto& row : payoff)
        for (const auto& v : row) shift = std::min(shift, v);
    shift = T(1) - shift; // make every entry >= 1
    std::vector<std::vector<T>> pos(m, std::vector<T>(n));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) pos[i][j] = payoff[i][j] + shift;
    std::vector<T> z, y;
    positive_game_lp(pos, z, y);
    T zsum(0), ysum(0);
    for (const auto& v : z) zsum += v;
    for (const auto& v : y) ysum += v;
    if (!(zsum > T(0)) || !(ysum > T(0)))
        throw SolverError("game linear program returned a degenerate strategy");
    GameSolution<T> sol;
    sol.value = T(1) / zsum - shift;
    sol.col_mix.assign(n, T(0));
    for (std::size_t j = 0; j < n; ++j) sol.col_mix[j] = z[j] / zsum;
    sol.row_mix.assign(m, T(0));
    for (std::size_t i = 0; i < m; ++i) sol.row_mix[i] = y[i] / ysum;
    return sol;
}

} // namespace detail

// Solves the game; the tableau is built on the smaller side (the transposed
// game with negated payoff swaps the players), so tall payoff matrices stay cheap.
template <class T>
GameSolution<T> solve_matrix_game(const std::vector<std::vector<T>>& payoff) {
    if (payoff.empty() || payoff[0].empty()) throw SolverError("empty game matrix");
    const std::size_t m = payoff.size();
    const std::size_t n = payoff[0].size();
    for (const auto& row : payoff)
        if (row.size() != n) throw SolverError("ragged game matrix");
    if (m <= n) return detail::solve_game_oriented(payoff);
    std::vector<std::vector<T>> neg_t(n, std::vector<T>(m));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) neg_t[j][i] = -payoff[i][j];
    GameSolution<T> t = detail::solve_game_oriented(neg_t);
    GameSolution<T> sol;
    sol.value = -t.value;
    sol.row_mix = std::move(t.col_mix);
    sol.col_mix = std::move(t.row_mix);
    return sol;
}

} // namespace lsnell
