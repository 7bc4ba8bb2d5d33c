#include "lcot/graph/modbp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <random>

#include "lcot/common/error.hpp"
#include "lcot/common/hash.hpp"

namespace lcot::graph {
namespace {

double entropy(const std::vector<double>& counts, double total) {
    double h = 0;
    for (double c : counts)
        if (c > 0) h -= (c / total) * std::log(c / total);
    return h;
}

std::vector<int> compact(const std::vector<int>& labels) {
    std::map<int, int> ids;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, fresh] = ids.emplace(labels[i], int(ids.size()));
        out[i] = it->second;
    }
    return out;
}

} // namespace

double default_beta(int q, double mean_degree) {
    double root = std::sqrt(mean_degree) - 1.0;
    if (root <= 1e-9) return 5.0;
    return std::clamp(std::log(double(q) / root + 1.0), 0.1, 5.0);
}

int Partition::group_count() const {
    std::vector<char> seen(std::size_t(std::max(q, 1)), 0);
    for (int l : labels) seen[std::size_t(l)] = 1;
    return int(std::count(seen.begin(), seen.end(), 1));
}

std::vector<std::vector<int>> Partition::groups() const {
    std::vector<std::vector<int>> by_label(std::size_t(std::max(q, 1)));
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[std::size_t(labels[i])].push_back(int(i));
    std::vector<std::vector<int>> out;
    for (auto& g : by_label)
        if (!g.empty()) out.push_back(std::move(g));
    return out;
}

double modularity(const Graph& g, const std::vector<int>& labels) {
    if (labels.size() != std::size_t(g.size())) throw validation_error("label count does not match the graph");
    if (g.edge_count() == 0) return 0.0;
    const double m = double(g.edge_count());
    std::map<int, double> intra, degree;
    for (int i = 0; i < g.size(); ++i) {
        int c = labels[std::size_t(i)];
        degree[c] += double(g.degree(i));
        for (int j : g.neighbors(i))
            if (j > i && labels[std::size_t(j)] == c) intra[c] += 1.0;
    }
    double q = 0;
    for (const auto& [c, d] : degree) q += intra[c] / m - (d / (2 * m)) * (d / (2 * m));
    return q;
}

double nmi(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw validation_error("nmi needs labelings of equal length");
    if (a.empty()) return 1.0;
    auto x = compact(a), y = compact(b);
    int nx = *std::max_element(x.begin(), x.end()) + 1, ny = *std::max_element(y.begin(), y.end()) + 1;
    std::vector<double> joint(std::size_t(nx * ny), 0), px(std::size_t(nx), 0), py(std::size_t(ny), 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        joint[std::size_t(x[i] * ny + y[i])] += 1;
        px[std::size_t(x[i])] += 1;
        py[std::size_t(y[i])] += 1;
    }
    const double n = double(x.size());
    double hx = entropy(px, n), hy = entropy(py, n);
    if (hx + hy == 0) return 1.0;
    double mi = 0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            double c = joint[std::size_t(i * ny + j)];
            if (c > 0) mi += (c / n) * std::log(c * n / (px[std::size_t(i)] * py[std::size_t(j)]));
        }
    return std::clamp(2.0 * mi / (hx + hy), 0.0, 1.0);
}

Partition modbp_partition(const Graph& g, const BPOptions& options) {
    if (g.size() == 0) throw validation_error("cannot partition an empty graph");
    if (options.q < 2) throw validation_error("community count q must be at least 2");
    const int q = options.q;
    const double beta = options.beta.value_or(default_beta(q, g.mean_degree()));
    if (!(beta > 0)) throw validation_error("inverse temperature beta must be positive");

    const int n = g.size();
    const auto uq = std::size_t(q);
    const double two_m = 2.0 * double(g.edge_count());
    const double eb = std::expm1(beta);

    BPState s;
    s.q = q;
    s.beta = beta;
    s.offsets.resize(std::size_t(n) + 1, 0);
    for (int i = 0; i < n; ++i) s.offsets[std::size_t(i) + 1] = s.offsets[std::size_t(i)] + g.degree(i);
    // Slot of the reverse message j -> i for every i -> j.
    std::vector<std::size_t> reverse(s.offsets.back());
    for (int i = 0; i < n; ++i) {
        const auto& nb = g.neighbors(i);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const auto& back = g.neighbors(nb[k]);
            auto pos = std::size_t(std::lower_bound(back.begin(), back.end(), i) - back.begin());
            reverse[s.offsets[std::size_t(i)] + k] = s.offsets[std::size_t(nb[k])] + pos;
        }
    }

    std::mt19937_64 rng(mix64(options.seed));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto normalize = [&](double* v) {
        double z = 0;
        for (std::size_t t = 0; t < uq; ++t) z += v[t];
        for (std::size_t t = 0; t < uq; ++t) v[t] /= z;
    };
    s.messages.resize(s.offsets.back() * uq);
    for (std::size_t e = 0; e < s.offsets.back(); ++e) {
        for (std::size_t t = 0; t < uq; ++t) s.messages[e * uq + t] = 0.5 + u(rng);
        normalize(&s.messages[e * uq]);
    }

    // log(1 + psi (e^beta - 1)) summed over incoming messages, plus the degree field.
    std::vector<double> field(uq), theta(uq, 0.0), incoming;
    auto node_field = [&](int i) {
        incoming.resize(g.degree(i) * uq);
        for (std::size_t t = 0; t < uq; ++t) field[t] = two_m > 0 ? -beta * double(g.degree(i)) * theta[t] / two_m : 0.0;
        for (std::size_t k = 0; k < g.degree(i); ++k) {
            const double* in = &s.messages[reverse[s.offsets[std::size_t(i)] + k] * uq];
            for (std::size_t t = 0; t < uq; ++t) {
                incoming[k * uq + t] = std::log1p(in[t] * eb);
                field[t] += incoming[k * uq + t];
            }
        }
    };
    auto softmax_into = [&](const std::vector<double>& h, double* out) {
        double mx = *std::max_element(h.begin(), h.end());
        for (std::size_t t = 0; t < uq; ++t) out[t] = std::exp(h[t] - mx);
        normalize(out);
    };

    s.marginals.assign(std::size_t(n) * uq, 0.0);
    for (int i = 0; i < n; ++i) {
        node_field(i);
        softmax_into(field, &s.marginals[std::size_t(i) * uq]);
    }
    for (int i = 0; i < n; ++i)
        for (std::size_t t = 0; t < uq; ++t) theta[t] += double(g.degree(i)) * s.marginals[std::size_t(i) * uq + t];

    Partition p;
    p.q = q;
    p.beta = beta;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> h(uq), fresh(uq);
    for (int iter = 1; iter <= options.max_iter; ++iter) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_change = 0;
        for (int i : order) {
            // Incoming messages and theta stay fixed while i updates, so one
            // field serves every outgoing message and the new marginal.
            node_field(i);
            const std::size_t base = s.offsets[std::size_t(i)];
            for (std::size_t k = 0; k < g.degree(i); ++k) {
                for (std::size_t t = 0; t < uq; ++t) h[t] = field[t] - incoming[k * uq + t];
                softmax_into(h, fresh.data());
                double* out = &s.messages[(base + k) * uq];
                for (std::size_t t = 0; t < uq; ++t) {
                    double v = (1.0 - options.damping) * fresh[t] + options.damping * out[t];
                    max_change = std::max(max_change, std::abs(v - out[t]));
                    out[t] = v;
                }
                normalize(out);
            }
            double* marg = &s.marginals[std::size_t(i) * uq];
            for (std::size_t t = 0; t < uq; ++t) theta[t] -= double(g.degree(i)) * marg[t];
            softmax_into(field, marg);
            for (std::size_t t = 0; t < uq; ++t) theta[t] += double(g.degree(i)) * marg[t];
        }
        p.iterations = iter;
        if (options.on_sweep) options.on_sweep(s);
        if (max_change < options.tol) {
            p.converged = true;
            break;
        }
    }

    p.labels.resize(std::size_t(n));
    double log_z = 0;
    for (int i = 0; i < n; ++i) {
        const double* marg = &s.marginals[std::size_t(i) * uq];
        p.labels[std::size_t(i)] = int(std::max_element(marg, marg + uq) - marg);
        double mx = *std::max_element(marg, marg + uq);
        log_z += std::log(mx);
    }
    s.free_energy_proxy = -log_z / double(n);
    p.retrieval_modularity = modularity(g, p.labels);
    return p;
}

std::string_view to_string(StructureTest t) {
    switch (t) {
    case StructureTest::structured: return "structured";
    case StructureTest::structureless: return "structureless";
    case StructureTest::too_small: return "too_small";
    }
    return "structureless";
}

StructureTest parse_structure_test(std::string_view s) {
    if (s == "structured") return StructureTest::structured;
    if (s == "structureless") return StructureTest::structureless;
    if (s == "too_small") return StructureTest::too_small;
    throw parse_error("unknown structure test: " + std::string(s));
}

StructureResult detect_structure(const Graph& g, const Partition& partition, int n_null, std::uint64_t seed,
                                 int min_size) {
    if (n_null < kMinNullSamples)
        throw validation_error("null ensemble needs at least " + std::to_string(kMinNullSamples) + " samples");
    StructureResult r;
    r.observed = partition.retrieval_modularity;
    if (g.size() < min_size) {
        r.test = StructureTest::too_small;
        return r;
    }
    std::vector<double> null_q;
    for (int k = 0; k < n_null; ++k) {
        std::uint64_t s = mix64(seed ^ mix64(std::uint64_t(k) + 0x9e3779b97f4a7c15ULL));
        BPOptions opt;
        opt.q = partition.q;
        opt.beta = partition.beta;
        opt.seed = s;
        null_q.push_back(modbp_partition(rewire(g, s), opt).retrieval_modularity);
    }
    double mean = std::accumulate(null_q.begin(), null_q.end(), 0.0) / double(n_null);
    double var = 0;
    for (double x : null_q) var += (x - mean) * (x - mean);
    r.null_mean = mean;
    r.null_std = std::sqrt(var / double(n_null - 1));
    // Non-positive modularity is never community structure, whatever the nulls say.
    r.test = partition.group_count() >= 2 && r.observed > 0 && r.observed > mean + 2.0 * r.null_std
                 ? StructureTest::structured
                                                                                   : StructureTest::structureless;
    return r;
}

Selection select_q(const Graph& g, const SelectOptions& options) {
    if (options.q_max < 2) throw validation_error("q_max must be at least 2");
    if (options.restarts < 1) throw validation_error("restarts must be at least 1");
    Selection out;
    if (g.size() < options.min_size) {
        out.structure.test = StructureTest::too_small;
        return out;
    }
    std::vector<Partition> candidates;
    for (int q = 2; q <= options.q_max && q <= g.size(); ++q) {
        Partition best;
        bool have = false;
        for (int r = 0; r < options.restarts; ++r) {
            BPOptions opt;
            opt.q = q;
            opt.beta = options.beta;
            opt.seed = mix64(options.seed * 1000003ULL + std::uint64_t(q) * 7919ULL + std::uint64_t(r));
            auto p = modbp_partition(g, opt);
            if (!have || p.retrieval_modularity > best.retrieval_modularity) best = std::move(p), have = true;
        }
        if (best.group_count() >= 2) candidates.push_back(std::move(best));
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Partition& a, const Partition& b) {
        if (a.retrieval_modularity != b.retrieval_modularity) return a.retrieval_modularity > b.retrieval_modularity;
        if (a.group_count() != b.group_count()) return a.group_count() < b.group_count();
        return a.q < b.q;
    });
    for (const auto& c : candidates) {
        if (c.retrieval_modularity <= 0) break;
        auto test = detect_structure(g, c, options.n_null, mix64(options.seed + std::uint64_t(c.q)), options.min_size);
        if (test.test == StructureTest::structured) {
            out.structured = true;
            out.q = c.group_count();
            out.partition = c;
            out.structure = test;
            return out;
        }
        if (!out.q) out.structure = test;
    }
    out.structure.test = StructureTest::structureless;
    return out;
}

} // namespace lcot::graph
