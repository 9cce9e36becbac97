#include "vsrt/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "vsrt/errors.hpp"
#include "vsrt/rng.hpp"

namespace vsrt::theory {

KPatternTask make_kpattern(int n, int k, int j_star, std::uint64_t seed, const std::string& kind) {
    if (k < 1 || k > n || j_star < 0 || j_star + k > n) {
        throw ConfigError("k-pattern bounds violated: n=" + std::to_string(n) + " k=" + std::to_string(k) +
                          " j*=" + std::to_string(j_star));
    }
    if (n > 24) throw ResourceError("k-pattern tasks are limited to n <= 24");
    KPatternTask t;
    t.n = n;
    t.k = k;
    t.j_star = j_star;
    t.table.resize(std::size_t(1) << k);
    if (kind == "parity") {
        for (std::size_t z = 0; z < t.table.size(); ++z) {
            int prod = 1;
            for (int b = 0; b < k; ++b) prod *= (z >> b) & 1 ? 1 : -1;
            t.table[z] = prod;
        }
    } else if (kind == "random") {
        Rng rng(seed);
        for (auto& v : t.table) v = rng.pm_one();
    } else {
        throw ConfigError("k-pattern kind must be parity|random");
    }
    return t;
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * double(n - k + i) / double(i);
    return r;
}

double theorem1_bound(int n, int k, int q) {
    const double c1 = binomial(n - 1, k);
    const double c2 = binomial(n - 1, k - 1);
    const double inv = 1.0 / std::max(c1, c2);
    return double(q) * double(n) * inv;
}

double theorem2_rhs(int n, int k, int q, double eta, int steps) {
    const double s = double(steps);
    return eta * eta * s * s * double(n) * std::pow(double(k), 2.5) * std::pow(2.0, k + 1) +
           double(k) * double(k) * std::pow(2.0, 2 * k + 1) / (double(q) * eta * s) +
           eta * double(n) * double(q) * double(k);
}

double fcsa_sq_gradnorm_at(const std::vector<double>& w, const std::vector<double>& u,
                           const KPatternTask& task) {
    const int n = task.n;
    const int q = int(u.size());
    if (w.size() != std::size_t(q) * n) throw ShapeError("fcsa weights must be q x n");
    const std::uint64_t total = std::uint64_t(1) << n;
    std::vector<double> grad(std::size_t(q) * n, 0.0);
    std::vector<double> a(q);
    std::vector<double> xv(n);
    const double inv = 1.0 / double(total);
    for (std::uint64_t x = 0; x < total; ++x) {
        for (int j = 0; j < n; ++j) xv[j] = (x >> j) & 1 ? 1.0 : -1.0;
        double h = 0.0;
        for (int i = 0; i < q; ++i) {
            double s = 0.0;
            const double* wi = w.data() + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) s += wi[j] * xv[j];
            a[i] = s;
            if (s > 0.0) h += u[std::size_t(i)] * s;
        }
        const int y = task.eval(std::uint32_t(x));
        if (1.0 - h * y <= 0.0) continue; // saturated hinge
        for (int i = 0; i < q; ++i) {
            if (a[i] <= 0.0) continue;
            const double c = -double(y) * u[std::size_t(i)] * inv;
            double* gi = grad.data() + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) gi[j] += c * xv[j];
        }
    }
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    return sq;
}

namespace {

// Monte Carlo variant sharing the accumulation structure of the exact path.
double fcsa_sq_gradnorm_mc(const std::vector<double>& w, const std::vector<double>& u,
                           const KPatternTask& task, int samples, Rng& rng) {
    const int n = task.n;
    const int q = int(u.size());
    std::vector<double> grad(std::size_t(q) * n, 0.0);
    std::vector<double> a(q);
    std::vector<double> xv(n);
    const double inv = 1.0 / double(samples);
    for (int s0 = 0; s0 < samples; ++s0) {
        const std::uint64_t x = rng.next_u64() & ((std::uint64_t(1) << n) - 1);
        for (int j = 0; j < n; ++j) xv[j] = (x >> j) & 1 ? 1.0 : -1.0;
        double h = 0.0;
        for (int i = 0; i < q; ++i) {
            double s = 0.0;
            const double* wi = w.data() + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) s += wi[j] * xv[j];
            a[i] = s;
            if (s > 0.0) h += u[std::size_t(i)] * s;
        }
        const int y = task.eval(std::uint32_t(x));
        if (1.0 - h * y <= 0.0) continue;
        for (int i = 0; i < q; ++i) {
            if (a[i] <= 0.0) continue;
            const double c = -double(y) * u[std::size_t(i)] * inv;
            double* gi = grad.data() + std::size_t(i) * n;
            for (int j = 0; j < n; ++j) gi[j] += c * xv[j];
        }
    }
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    return sq;
}

} // namespace

GradNormStats fcsa_init_gradnorm(const KPatternTask& task, int q, int trials, std::uint64_t seed) {
    if (task.n > 24) throw ResourceError("fcsa_init_gradnorm: n > 24 not supported");
    const bool exact = task.n <= 16;
    GradNormStats stats;
    stats.exact = exact;
    stats.bound = theorem1_bound(task.n, task.k, q);
    Rng master(seed);
    const double sigma = 1.0 / std::sqrt(double(task.n));
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng = master.child(std::uint64_t(trial));
        std::vector<double> w(std::size_t(q) * task.n);
        std::vector<double> u(q);
        for (auto& v : w) v = sigma * rng.normal();
        for (auto& v : u) v = double(rng.pm_one());
        const double sq = exact ? fcsa_sq_gradnorm_at(w, u, task)
                                : fcsa_sq_gradnorm_mc(w, u, task, 1 << 16, rng);
        stats.per_trial.push_back(sq);
    }
    double sum = 0.0;
    for (double v : stats.per_trial) sum += v;
    stats.mean = stats.per_trial.empty() ? 0.0 : sum / double(stats.per_trial.size());
    std::vector<double> sorted = stats.per_trial;
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty()) {
        const std::size_t m = sorted.size() / 2;
        stats.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
    }
    return stats;
}

namespace {

struct ConvLearner {
    int n, k, q, windows;
    std::vector<double> w;       // q x k
    std::vector<double> u;       // windows x q
    double bias;                 // fixed threshold -(k-1)/k
    std::vector<std::uint16_t> codes; // 2^n x windows window codes

    ConvLearner(const KPatternTask& task, int q_, Rng& rng)
        : n(task.n), k(task.k), q(q_), windows(task.n - task.k + 1) {
        w.resize(std::size_t(q) * k);
        for (auto& v : w) v = double(rng.pm_one()) / double(k);
        u.assign(std::size_t(windows) * q, 0.0);
        bias = -double(k - 1) / double(k);
        const std::uint64_t total = std::uint64_t(1) << n;
        codes.resize(total * std::size_t(windows));
        const std::uint32_t mask = (1u << k) - 1u;
        for (std::uint64_t x = 0; x < total; ++x) {
            for (int j = 0; j < windows; ++j) {
                codes[x * windows + j] = std::uint16_t((x >> j) & mask);
            }
        }
    }

    // relu(W z + bias) for every window pattern z; also the active masks.
    void features(std::vector<double>& f, std::vector<char>& act) const {
        const int zn = 1 << k;
        f.assign(std::size_t(zn) * q, 0.0);
        act.assign(std::size_t(zn) * q, 0);
        for (int z = 0; z < zn; ++z) {
            for (int i = 0; i < q; ++i) {
                double s = bias;
                for (int b = 0; b < k; ++b) s += w[std::size_t(i) * k + b] * ((z >> b) & 1 ? 1.0 : -1.0);
                if (s > 0.0) {
                    f[std::size_t(z) * q + i] = s;
                    act[std::size_t(z) * q + i] = 1;
                }
            }
        }
    }

    double value(std::uint64_t x, const std::vector<double>& f) const {
        double h = 0.0;
        for (int j = 0; j < windows; ++j) {
            const int z = codes[x * windows + j];
            const double* fz = f.data() + std::size_t(z) * q;
            const double* uj = u.data() + std::size_t(j) * q;
            double s = 0.0;
            for (int i = 0; i < q; ++i) s += uj[i] * fz[i];
            h += s;
        }
        return h;
    }
};

} // namespace

LearnResult stcsa_learn(const KPatternTask& task, int q, double eta, int steps, std::uint64_t seed) {
    if (task.n > 16) throw ResourceError("stcsa_learn: exact enumeration limited to n <= 16");
    Rng rng(seed);
    ConvLearner L(task, q, rng);
    const std::uint64_t total = std::uint64_t(1) << task.n;
    const double inv = 1.0 / double(total);
    const int zn = 1 << task.k;
    LearnResult res;
    res.rhs = theorem2_rhs(task.n, task.k, q, eta, steps);
    res.width_gate = std::pow(2.0, task.k + 3) * std::log(std::pow(2.0, task.k) / 0.1);

    std::vector<double> f;
    std::vector<char> act;
    std::vector<double> cnt(std::size_t(L.windows) * zn);
    std::vector<int> ys(total);
    for (std::uint64_t x = 0; x < total; ++x) ys[x] = task.eval(std::uint32_t(x));

    for (int s = 0; s < steps; ++s) {
        L.features(f, act);
        // G[j][z] = <u^(j), F[z]>
        std::vector<double> g(std::size_t(L.windows) * zn, 0.0);
        for (int j = 0; j < L.windows; ++j) {
            const double* uj = L.u.data() + std::size_t(j) * q;
            for (int z = 0; z < zn; ++z) {
                const double* fz = f.data() + std::size_t(z) * q;
                double acc = 0.0;
                for (int i = 0; i < q; ++i) acc += uj[i] * fz[i];
                g[std::size_t(j) * zn + z] = acc;
            }
        }
        std::fill(cnt.begin(), cnt.end(), 0.0);
        double loss = 0.0;
        for (std::uint64_t x = 0; x < total; ++x) {
            double h = 0.0;
            const std::uint16_t* cx = L.codes.data() + x * L.windows;
            for (int j = 0; j < L.windows; ++j) h += g[std::size_t(j) * zn + cx[j]];
            const int y = ys[x];
            const double margin = 1.0 - h * y;
            if (margin > 0.0) {
                loss += margin;
                const double c = -double(y) * inv;
                for (int j = 0; j < L.windows; ++j) cnt[std::size_t(j) * zn + cx[j]] += c;
            }
        }
        loss *= inv;
        res.losses.push_back(loss);

        // grad_u^(j) = sum_z cnt[j][z] F[z]
        std::vector<double> gu(std::size_t(L.windows) * q, 0.0);
        for (int j = 0; j < L.windows; ++j) {
            for (int z = 0; z < zn; ++z) {
                const double c = cnt[std::size_t(j) * zn + z];
                if (c == 0.0) continue;
                const double* fz = f.data() + std::size_t(z) * q;
                double* gj = gu.data() + std::size_t(j) * q;
                for (int i = 0; i < q; ++i) gj[i] += c * fz[i];
            }
        }
        // grad_W[i] = sum_z (sum_j cnt[j][z] u^(j)_i) act_i(z) z^T
        std::vector<double> sz(std::size_t(zn) * q, 0.0);
        for (int z = 0; z < zn; ++z) {
            for (int j = 0; j < L.windows; ++j) {
                const double c = cnt[std::size_t(j) * zn + z];
                if (c == 0.0) continue;
                const double* uj = L.u.data() + std::size_t(j) * q;
                double* szv = sz.data() + std::size_t(z) * q;
                for (int i = 0; i < q; ++i) szv[i] += c * uj[i];
            }
        }
        std::vector<double> gw(std::size_t(q) * task.k, 0.0);
        for (int z = 0; z < zn; ++z) {
            for (int i = 0; i < q; ++i) {
                if (!act[std::size_t(z) * q + i]) continue;
                const double c = sz[std::size_t(z) * q + i];
                if (c == 0.0) continue;
                for (int b = 0; b < task.k; ++b) {
                    gw[std::size_t(i) * task.k + b] += c * ((z >> b) & 1 ? 1.0 : -1.0);
                }
            }
        }
        for (std::size_t i = 0; i < L.u.size(); ++i) L.u[i] -= eta * gu[i];
        for (std::size_t i = 0; i < L.w.size(); ++i) L.w[i] -= eta * gw[i];
    }
    res.final_loss = res.losses.empty() ? 0.0 : res.losses.back();
    double sum = 0.0;
    for (double v : res.losses) sum += v;
    res.avg_loss = res.losses.empty() ? 0.0 : sum / double(res.losses.size());
    return res;
}

LearnResult fcsa_learn(const KPatternTask& task, int q, double eta, int steps, std::uint64_t seed) {
    if (task.n > 16) throw ResourceError("fcsa_learn: exact enumeration limited to n <= 16");
    Rng rng(seed);
    const int n = task.n;
    std::vector<double> w(std::size_t(q) * n);
    std::vector<double> u(q, 0.0);
    const double sigma = 1.0 / std::sqrt(double(n));
    for (auto& v : w) v = sigma * rng.normal();
    const std::uint64_t total = std::uint64_t(1) << n;
    const double inv = 1.0 / double(total);
    std::vector<int> ys(total);
    for (std::uint64_t x = 0; x < total; ++x) ys[x] = task.eval(std::uint32_t(x));

    LearnResult res;
    res.rhs = theorem2_rhs(n, task.k, q, eta, steps);
    std::vector<double> a(q);
    std::vector<double> gu(q), gw(std::size_t(q) * n);
    for (int s = 0; s < steps; ++s) {
        std::fill(gu.begin(), gu.end(), 0.0);
        std::fill(gw.begin(), gw.end(), 0.0);
        double loss = 0.0;
        for (std::uint64_t x = 0; x < total; ++x) {
            double h = 0.0;
            for (int i = 0; i < q; ++i) {
                double acc = 0.0;
                const double* wi = w.data() + std::size_t(i) * n;
                for (int j = 0; j < n; ++j) acc += wi[j] * ((x >> j) & 1 ? 1.0 : -1.0);
                a[i] = acc;
                if (acc > 0.0) h += u[std::size_t(i)] * acc;
            }
            const int y = ys[x];
            const double margin = 1.0 - h * y;
            if (margin <= 0.0) continue;
            loss += margin;
            const double c = -double(y) * inv;
            for (int i = 0; i < q; ++i) {
                if (a[i] <= 0.0) continue;
                gu[std::size_t(i)] += c * a[i];
                const double cu = c * u[std::size_t(i)];
                if (cu != 0.0) {
                    double* gwi = gw.data() + std::size_t(i) * n;
                    for (int j = 0; j < n; ++j) gwi[j] += cu * ((x >> j) & 1 ? 1.0 : -1.0);
                }
            }
        }
        res.losses.push_back(loss * inv);
        for (int i = 0; i < q; ++i) u[std::size_t(i)] -= eta * gu[std::size_t(i)];
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * gw[i];
    }
    res.final_loss = res.losses.empty() ? 0.0 : res.losses.back();
    double sum = 0.0;
    for (double v : res.losses) sum += v;
    res.avg_loss = res.losses.empty() ? 0.0 : sum / double(res.losses.size());
    return res;
}

Lemma3Result lemma3_construct_ustar(const KPatternTask& task, int q, std::uint64_t seed) {
    if (task.n > 14) throw ResourceError("lemma3_construct_ustar: exhaustive check limited to n <= 14");
    Rng rng(seed);
    ConvLearner L(task, q, rng);
    const int zn = 1 << task.k;
    Lemma3Result res;
    res.norm_bound = std::pow(2.0, task.k + 1) * double(task.k) / std::sqrt(double(q));

    // sign buckets of the +-1/k initialization
    std::vector<std::vector<int>> buckets(zn);
    for (int i = 0; i < q; ++i) {
        int code = 0;
        for (int b = 0; b < task.k; ++b) {
            if (L.w[std::size_t(i) * task.k + b] > 0.0) code |= 1 << b;
        }
        buckets[code].push_back(i);
    }
    for (int z = 0; z < zn; ++z) {
        if (buckets[z].empty()) {
            std::string pat;
            for (int b = 0; b < task.k; ++b) pat += (z >> b) & 1 ? '+' : '-';
            res.missing_bucket = pat;
            return res;
        }
    }
    res.constructed = true;
    for (int z = 0; z < zn; ++z) {
        const double val = double(task.k) / double(buckets[z].size()) * double(task.eval_window(z));
        for (int i : buckets[z]) {
            L.u[std::size_t(task.j_star) * q + i] = val;
        }
    }
    double norm2 = 0.0;
    for (int i = 0; i < q; ++i) {
        const double v = L.u[std::size_t(task.j_star) * q + i];
        norm2 += v * v;
    }
    res.u_norm = std::sqrt(norm2);

    std::vector<double> f;
    std::vector<char> act;
    L.features(f, act);
    const std::uint64_t total = std::uint64_t(1) << task.n;
    double worst = 0.0;
    for (std::uint64_t x = 0; x < total; ++x) {
        const double h = L.value(x, f);
        worst = std::max(worst, std::abs(h - double(task.eval(std::uint32_t(x)))));
    }
    res.residual = worst;
    return res;
}

TheoryGrid TheoryGrid::defaults() {
    TheoryGrid g;
    g.gradnorm_n = {8, 12, 16};
    g.gradnorm_k = {2, 4, 6};
    g.gradnorm_q = {8, 32};
    g.trials = 20;
    g.lemma3_k = {1, 2, 3};
    g.lemma3_q = {64, 128, 512};
    g.lemma3_n = 10;
    g.lemma3_seeds = 8;
    g.learn_n = 12;
    g.learn_k = 3;
    g.learn_q = 256;
    g.learn_eta = {1e-3, 1e-2, 1e-1};
    g.learn_steps = 5000;
    g.learn_fcsa_paired = true;
    g.seed = 0;
    return g;
}

namespace {

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        const std::string item = s.substr(pos, next - pos);
        if (!item.empty()) out.push_back(std::stoi(item));
        pos = next + 1;
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t next = s.find(',', pos);
        if (next == std::string::npos) next = s.size();
        const std::string item = s.substr(pos, next - pos);
        if (!item.empty()) out.push_back(std::stod(item));
        pos = next + 1;
    }
    return out;
}

} // namespace

TheoryGrid TheoryGrid::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open theory grid: " + path);
    TheoryGrid g; // empty grids unless listed
    g.learn_eta.clear();
    g.lemma3_seeds = 0;
    std::string line;
    int lineno = 0;
    try {
        while (std::getline(in, line)) {
            ++lineno;
            const auto h = line.find('#');
            if (h != std::string::npos) line = line.substr(0, h);
            const auto strip = [](const std::string& s) {
                const auto a = s.find_first_not_of(" \t\r");
                if (a == std::string::npos) return std::string();
                const auto b = s.find_last_not_of(" \t\r");
                return s.substr(a, b - a + 1);
            };
            if (strip(line).empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError("expected key = value");
            const std::string key = strip(line.substr(0, eq));
            const std::string val = strip(line.substr(eq + 1));
            if (key == "gradnorm_n") {
                g.gradnorm_n = parse_int_list(val);
            } else if (key == "gradnorm_k") {
                g.gradnorm_k = parse_int_list(val);
            } else if (key == "gradnorm_q") {
                g.gradnorm_q = parse_int_list(val);
            } else if (key == "trials") {
                g.trials = std::stoi(val);
            } else if (key == "lemma3_k") {
                g.lemma3_k = parse_int_list(val);
            } else if (key == "lemma3_q") {
                g.lemma3_q = parse_int_list(val);
            } else if (key == "lemma3_n") {
                g.lemma3_n = std::stoi(val);
            } else if (key == "lemma3_seeds") {
                g.lemma3_seeds = std::stoi(val);
            } else if (key == "learn_n") {
                g.learn_n = std::stoi(val);
            } else if (key == "learn_k") {
                g.learn_k = std::stoi(val);
            } else if (key == "learn_q") {
                g.learn_q = std::stoi(val);
            } else if (key == "learn_eta") {
                g.learn_eta = parse_double_list(val);
            } else if (key == "learn_steps") {
                g.learn_steps = std::stoi(val);
            } else if (key == "learn_fcsa_paired") {
                g.learn_fcsa_paired = std::stoi(val) != 0;
            } else if (key == "seed") {
                g.seed = std::stoull(val);
            } else {
                throw ConfigError("unknown theory grid key: " + key);
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    return g;
}

void run_theory(const TheoryGrid& grid, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    Rng master(grid.seed);
    char buf[256];

    {
        std::ofstream out(out_dir + "/gradnorm.csv");
        if (!out) throw IoError("cannot write gradnorm.csv");
        out << "n,k,q,trial,sq_norm,bound\n";
        std::uint64_t cell = 0;
        for (int n : grid.gradnorm_n) {
            for (int k : grid.gradnorm_k) {
                for (int q : grid.gradnorm_q) {
                    const std::uint64_t cell_seed = master.child(cell).next_u64();
                    ++cell;
                    if (k > n) continue;
                    KPatternTask task = make_kpattern(n, k, (n - k) / 2, cell_seed, "parity");
                    GradNormStats st = fcsa_init_gradnorm(task, q, grid.trials, cell_seed);
                    for (std::size_t tr = 0; tr < st.per_trial.size(); ++tr) {
                        std::snprintf(buf, sizeof buf, "%d,%d,%d,%zu,%.12g,%.12g\n", n, k, q, tr,
                                      st.per_trial[tr], st.bound);
                        out << buf;
                    }
                }
            }
        }
    }
    {
        std::ofstream out(out_dir + "/lemma3.csv");
        if (!out) throw IoError("cannot write lemma3.csv");
        out << "n,k,q,seed,constructed,residual,u_norm,bound\n";
        std::uint64_t cell = 1000000;
        for (int k : grid.lemma3_k) {
            for (int q : grid.lemma3_q) {
                for (int s = 0; s < grid.lemma3_seeds; ++s) {
                    const std::uint64_t cell_seed = master.child(cell).next_u64();
                    ++cell;
                    KPatternTask task =
                        make_kpattern(grid.lemma3_n, k, (grid.lemma3_n - k) / 2, cell_seed, "random");
                    Lemma3Result r = lemma3_construct_ustar(task, q, cell_seed);
                    std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%d,%.12g,%.12g,%.12g\n", grid.lemma3_n,
                                  k, q, s, r.constructed ? 1 : 0, r.residual, r.u_norm, r.norm_bound);
                    out << buf;
                }
            }
        }
    }
    {
        std::ofstream out(out_dir + "/learn.csv");
        if (!out) throw IoError("cannot write learn.csv");
        out << "family,n,k,q,eta,S,step,loss\n";
        std::uint64_t cell = 2000000;
        double best_eta = 0.0, best_final = 1e30;
        for (double eta : grid.learn_eta) {
            const std::uint64_t cell_seed = master.child(cell).next_u64();
            ++cell;
            KPatternTask task = make_kpattern(grid.learn_n, grid.learn_k,
                                              (grid.learn_n - grid.learn_k) / 2, cell_seed, "parity");
            LearnResult r = stcsa_learn(task, grid.learn_q, eta, grid.learn_steps, cell_seed);
            for (std::size_t s = 0; s < r.losses.size(); ++s) {
                std::snprintf(buf, sizeof buf, "stcsa,%d,%d,%d,%.9g,%d,%zu,%.12g\n", grid.learn_n,
                              grid.learn_k, grid.learn_q, eta, grid.learn_steps, s, r.losses[s]);
                out << buf;
            }
            if (r.final_loss < best_final) {
                best_final = r.final_loss;
                best_eta = eta;
            }
        }
        if (grid.learn_fcsa_paired && !grid.learn_eta.empty()) {
            const std::uint64_t cell_seed = master.child(cell).next_u64();
            KPatternTask task = make_kpattern(grid.learn_n, grid.learn_k,
                                              (grid.learn_n - grid.learn_k) / 2, cell_seed, "parity");
            LearnResult r = fcsa_learn(task, grid.learn_q, best_eta, grid.learn_steps, cell_seed);
            for (std::size_t s = 0; s < r.losses.size(); ++s) {
                std::snprintf(buf, sizeof buf, "fcsa,%d,%d,%d,%.9g,%d,%zu,%.12g\n", grid.learn_n,
                              grid.learn_k, grid.learn_q, best_eta, grid.learn_steps, s, r.losses[s]);
                out << buf;
            }
        }
    }
}

} // namespace vsrt::theory
