#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace vsrt::theory {

// Boolean target over {+-1}^n depending only on the k bits starting at
// j_star (0-indexed). The truth table has 2^k entries of +-1, window bit b
// (the bit at j_star + b) indexing bit b of the table key.
struct KPatternTask {
    int n = 0;
    int k = 0;
    int j_star = 0;
    std::vector<int> table; // size 2^k, values +-1

    int eval_window(std::uint32_t code) const { return table[code]; }
    int eval(std::uint32_t x) const {
        const std::uint32_t code = (x >> j_star) & ((1u << k) - 1u);
        return table[code];
    }
};

KPatternTask make_kpattern(int n, int k, int j_star, std::uint64_t seed,
                           const std::string& kind = "parity"); // parity | random

double binomial(int n, int k);
// qn * min{ C(n-1,k)^-1, C(n-1,k-1)^-1 }
double theorem1_bound(int n, int k, int q);
// eta^2 S^2 n k^{5/2} 2^{k+1} + k^2 2^{2k+1} / (q eta S) + eta n q k
double theorem2_rhs(int n, int k, int q, double eta, int steps);

// ||dL/dW||^2 of the hinge loss for the q-unit one-hidden-layer reduction of
// the fully connected attention hypothesis, at the given weights, expectation
// over the uniform distribution (exact enumeration).
double fcsa_sq_gradnorm_at(const std::vector<double>& w, const std::vector<double>& u,
                           const KPatternTask& task);

struct GradNormStats {
    std::vector<double> per_trial;
    double mean = 0.0;
    double median = 0.0;
    double bound = 0.0;
    bool exact = true;
};

// Weights drawn i.i.d. N(0, 1/n) (a permutation invariant law), u_i in {+-1}.
// Exact enumeration for n <= 16, Monte Carlo with 2^16 samples up to n = 24.
GradNormStats fcsa_init_gradnorm(const KPatternTask& task, int q, int trials, std::uint64_t seed);

struct LearnResult {
    std::vector<double> losses; // hinge loss before each step
    double avg_loss = 0.0;
    double final_loss = 0.0;
    double rhs = 0.0;  // Theorem 2 right-hand side at these (eta, S, n, k, q)
    double width_gate = 0.0; // 2^{k+3} log(2^k / 0.1), reported not enforced
};

// Convolutional hypothesis h(x) = sum_j <u^(j), relu(W x_{j..j+k} - (k-1)/k)>
// with W in {+-1/k}^{q x k}, u starting at zero; full-batch gradient descent
// on the hinge loss over the exact uniform distribution.
LearnResult stcsa_learn(const KPatternTask& task, int q, double eta, int steps, std::uint64_t seed);

// Paired baseline: h(x) = sum_i u_i relu(<w_i, x>) over the whole input,
// Gaussian init, same budget.
LearnResult fcsa_learn(const KPatternTask& task, int q, double eta, int steps, std::uint64_t seed);

struct Lemma3Result {
    bool constructed = false;
    std::string missing_bucket; // sign pattern like "+-+" when not constructed
    double residual = 0.0;      // max |h_{u*,W}(x) - f(x)| over all inputs
    double u_norm = 0.0;
    double norm_bound = 0.0; // 2^{k+1} k / sqrt(q)
};

// Builds u*_i = (k/|Omega_z|) g(z) on the sign buckets of the +-1/k init and
// checks the exact-interpolation claim on all 2^n inputs (n <= 14).
Lemma3Result lemma3_construct_ustar(const KPatternTask& task, int q, std::uint64_t seed);

struct TheoryGrid {
    std::vector<int> gradnorm_n, gradnorm_k, gradnorm_q;
    int trials = 20;
    std::vector<int> lemma3_k, lemma3_q;
    int lemma3_n = 10;
    int lemma3_seeds = 8;
    int learn_n = 12, learn_k = 3, learn_q = 256;
    std::vector<double> learn_eta;
    int learn_steps = 5000;
    bool learn_fcsa_paired = true;
    std::uint64_t seed = 0;

    static TheoryGrid defaults();
    static TheoryGrid from_file(const std::string& path);
};

// Writes gradnorm.csv, lemma3.csv and learn.csv under out_dir; cell RNG seeds
// derive from (seed, cell index) so results are order-independent.
void run_theory(const TheoryGrid& grid, const std::string& out_dir);

} // namespace vsrt::theory
