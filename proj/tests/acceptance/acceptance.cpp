// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance            run all criteria
//   acceptance --only 5   run one (repeatable)

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles/dense_oracle.hpp"
#include "support.hpp"

using namespace mlcsc;
using testing_support::random_dense;
using testing_support::random_sparse;
using testing_support::random_unit_columns;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ------------------------------------------------------------------ 1

Outcome operator_equivalence() {
    Rng rng(1001);
    double apply_err = 0.0, adjoint_err = 0.0, compose_err = 0.0, identity_err = 0.0;
    std::uniform_int_distribution<std::size_t> depth(1, 3), filters(1, 4), size(1, 5), ch(1, 3), stride(1, 2);
    for (int t = 0; t < 50; ++t) {
        const std::size_t channels = ch(rng);
        const std::size_t L = depth(rng);
        std::vector<ConvLayer> layers;
        std::size_t m = channels, total_stride = 1, support = 0;
        for (std::size_t i = 0; i < L; ++i) {
            const std::size_t s = stride(rng);
            const std::size_t n = size(rng);
            const std::size_t f = filters(rng);
            layers.push_back(testing_support::sparse_random_layer(m, f, n, s, i == 0 ? 0 : 1 + (n * m) / 2, rng));
            support += (n - 1) * total_stride;
            total_stride *= s;
            m = f;
        }
        support += 1;
        std::size_t N = total_stride * 4;
        while (N < support) N += total_stride;
        while (N + total_stride <= 32 && rng() % 2) N += total_stride;
        if (N > 32) return {false, fmt("model %d needs N=%zu > 32", t, N)};

        const SignalGeometry signal(N, channels);
        const EffectiveDict d = compose(layers, signal);
        const Eigen::MatrixXd full = oracle::effective_matrix(layers, N);
        const SparseVec g = random_sparse(d.code_geometry(), 1 + t % 6, rng);
        const DenseVec x = random_dense(signal, rng);
        apply_err = std::max(apply_err, oracle::max_abs_diff(oracle::to_eigen(d.apply(g)), full * oracle::to_eigen(g)));
        adjoint_err = std::max(adjoint_err,
                               oracle::max_abs_diff(oracle::to_eigen(d.adjoint(x)), full.transpose() * oracle::to_eigen(x)));
        identity_err = std::max(identity_err, std::abs(dot(d.apply(g), x) - dot(g.to_dense(), d.adjoint(x))));

        // layer by layer against each layer's own matrix
        std::size_t len = N;
        DenseVec probe = random_dense(signal, rng);
        for (const auto& layer : layers) {
            const Eigen::MatrixXd lm = oracle::layer_matrix(layer, len);
            const DenseVec code = random_dense(layer.code_geometry(len), rng);
            apply_err = std::max(apply_err, oracle::max_abs_diff(oracle::to_eigen(apply(layer, code)), lm * oracle::to_eigen(code)));
            adjoint_err = std::max(adjoint_err,
                                   oracle::max_abs_diff(oracle::to_eigen(adjoint(layer, probe)), lm.transpose() * oracle::to_eigen(probe)));
            identity_err = std::max(identity_err, std::abs(dot(apply(layer, code), probe) - dot(code, adjoint(layer, probe))));
            probe = random_dense(layer.code_geometry(len), rng);
            len /= layer.stride();
        }
        for (std::size_t j = 0; j < d.num_atoms(); ++j)
            compose_err = std::max(compose_err, oracle::max_abs_diff(oracle::to_eigen(d.column(j)), full.col(static_cast<Eigen::Index>(j))));
    }
    const double worst = std::max({apply_err, adjoint_err, compose_err, identity_err});
    return {worst <= 1e-10, fmt("max abs error apply %.2e, adjoint %.2e, compose %.2e, <Dg,x>-<g,D'x> %.2e (tol 1e-10)",
                                apply_err, adjoint_err, compose_err, identity_err)};
}

// ------------------------------------------------------------------ 2

Outcome support_growth() {
    Rng rng(1002);
    std::vector<std::size_t> ns{3, 5, 7};
    std::size_t stacks = 0;
    std::set<std::vector<std::size_t>> seen;
    do {
        for (std::size_t L = 1; L <= 3; ++L) {
            const std::vector<std::size_t> prefix(ns.begin(), ns.begin() + static_cast<long>(L));
            if (!seen.insert(prefix).second) continue;
            std::vector<ConvLayer> layers;
            std::size_t m = 1 + stacks % 2;
            const std::size_t channels = m;
            for (std::size_t n : prefix) {
                layers.push_back(testing_support::sparse_random_layer(m, 3, n, 1, 0, rng));
                m = 3;
            }
            std::size_t want = 1;
            for (std::size_t n : prefix) want += n - 1;
            const std::size_t N = 32;
            const EffectiveDict d(layers, SignalGeometry(N, channels));
            if (d.atom_size() != want || effective_support(layers) != want)
                return {false, fmt("stack %zu: reported atom size %zu, want %zu", stacks, d.atom_size(), want)};
            for (std::size_t f = 0; f < d.num_filters(); ++f) {
                const DenseVec base = d.column(f);
                std::vector<std::size_t> pos;
                for (std::size_t p = 0; p < N; ++p) {
                    bool nz = false;
                    for (std::size_t c = 0; c < channels; ++c) nz = nz || base.at(p, c) != 0.0;
                    if (nz) pos.push_back(p);
                }
                if (pos.size() != want || pos.front() != 0 || pos.back() != want - 1)
                    return {false, fmt("stack %zu filter %zu: support of %zu samples, want %zu contiguous", stacks, f,
                                       pos.size(), want)};
                for (std::size_t shift = 1; shift < N; ++shift) {
                    const DenseVec col = d.column(shift * d.num_filters() + f);
                    for (std::size_t p = 0; p < N; ++p)
                        for (std::size_t c = 0; c < channels; ++c)
                            if (col.at((p + shift) % N, c) != base.at(p, c))
                                return {false, fmt("stack %zu filter %zu: shift %zu is not a circular shift", stacks, f, shift)};
                }
            }
            ++stacks;
        }
    } while (std::next_permutation(ns.begin(), ns.end()));
    return {true, fmt("%zu stacks (all orders and prefixes of n=3,5,7): support = sum n - (L-1), atoms are exact shifts", stacks)};
}

// ------------------------------------------------------------------ 3

Outcome local_isometry() {
    Rng rng(1003);
    struct Config { std::size_t m_in, m_out, n; };
    const std::vector<Config> configs{{1, 4, 7}, {2, 3, 5}};
    std::size_t trials = 0, lib_violations = 0, oracle_violations = 0;
    double worst = 0.0;
    for (const auto& cfg : configs) {
        const ConvLayer layer = testing_support::sparse_random_layer(cfg.m_in, cfg.m_out, cfg.n, 1, 0, rng);
        const EffectiveDict d({layer}, SignalGeometry(64, cfg.m_in));
        const Eigen::MatrixXd m = oracle::layer_matrix(layer, 64);
        for (std::size_t k = 1; k <= 3; ++k) {
            const IsometryReport rep = check_local_isometry(d, k, 1000, rng);
            lib_violations += rep.violations;
            worst = std::max(worst, rep.worst_ratio);
            // same inequality with the dense matrix, explicit windows and an SVD for delta
            for (int t = 0; t < 1000; ++t) {
                ++trials;
                const auto support = random_stripe_support(d, k, rng, t % 2 ? 0 : k);
                const SparseVec g = random_code_on(d, support, rng);
                const Eigen::VectorXd ge = oracle::to_eigen(g);
                const Eigen::VectorXd x = m * ge;
                const auto [lo, hi] = oracle::singular_range_sq(m, support);
                const double delta = std::max(hi - 1.0, 1.0 - lo);
                const double lhs = std::pow(oracle::l2_inf_patch(x, 64, cfg.m_in, cfg.n), 2);
                const double rhs = (1.0 + delta) * std::pow(oracle::l2_inf_stripe(ge, 64, cfg.m_out, cfg.n), 2);
                if (lhs > rhs * (1.0 + 1e-12)) ++oracle_violations;
            }
        }
    }
    return {lib_violations == 0 && oracle_violations == 0,
            fmt("%zu oracle trials + %zu library trials (N=64, k=1..3): %zu / %zu violations, worst lhs/rhs %.4f", trials,
                trials, oracle_violations, lib_violations, worst)};
}

// ------------------------------------------------------------------ 4

Outcome omp_guarantee() {
    Rng rng(1004);
    std::size_t ok = 0, trials = 0;
    double mu_lo = 1.0, mu_hi = 0.0, worst_err = 0.0;
    std::size_t k_max_seen = 0;
    for (int t = 0; t < 200; ++t) {
        const Eigen::MatrixXd m = random_unit_columns(20, 40, rng);
        const DenseDict d(m);
        const double mu = mutual_coherence(d);
        mu_lo = std::min(mu_lo, mu);
        mu_hi = std::max(mu_hi, mu);
        const double edge = 0.5 * (1.0 + 1.0 / mu);
        const std::size_t k_max = static_cast<std::size_t>(std::ceil(edge)) - 1;
        if (k_max < 1) continue;
        const std::size_t k = 1 + static_cast<std::size_t>(t) % k_max;
        k_max_seen = std::max(k_max_seen, k_max);
        const SparseVec truth = random_sparse(d.code_geometry(), k, rng);
        PursuitConfig cfg;
        cfg.k = k;
        const SparseVec g = omp(d.apply(truth), d, cfg);
        double err = 0.0;
        for (std::size_t j = 0; j < d.num_atoms(); ++j) err = std::max(err, std::abs(g.get(j) - truth.get(j)));
        worst_err = std::max(worst_err, err);
        ++trials;
        if (g.support() == truth.support() && err <= 1e-8) ++ok;
    }
    return {trials == 200 && ok == trials,
            fmt("%zu/%zu exact recoveries, worst coefficient error %.1e; mu in [%.3f, %.3f], k up to %zu", ok, trials,
                worst_err, mu_lo, mu_hi, k_max_seen)};
}

// ------------------------------------------------------------------ 5

Outcome certified_recovery() {
    Rng rng = make_rng(7, 0);
    const MLCSCModel model = build_synthetic_model({}, rng);
    const CoherenceProfile prof = coherence_profile(model);
    std::vector<std::size_t> ks;
    for (std::size_t k = 1; k <= 10; ++k) ks.push_back(k);
    RecoveryOptions opts;
    opts.sigma = 0.02;
    opts.trials = 100;
    opts.seed = 11;
    opts.threads = 0;
    const auto records = run_recovery(model, ks, opts);

    std::size_t certified = 0, passed = 0;
    double inter3 = 0.0, eps0_sum = 0.0, margin_best = -std::numeric_limits<double>::infinity();
    for (const auto& r : records) {
        eps0_sum += r.eps0;
        margin_best = std::max(margin_best, r.thm7.margin);
        if (!r.thm7.certified) continue;
        ++certified;
        passed += r.thm7.pass ? 1 : 0;
        inter3 += r.methods[static_cast<int>(RecoveryMethod::ProjectionSP)].metrics[2].intersection;
    }

    const auto rows = summarize_recovery(records, ks, model.depth());
    auto mean_inter = [&](std::size_t k, std::size_t layer, RecoveryMethod m) {
        for (const auto& row : rows)
            if (row.k == k && row.layer == layer && row.method == m) return row.mean_intersection;
        return kNaN;
    };
    bool ordering = true;
    std::ostringstream order;
    for (std::size_t k = 2; k <= 10; ++k) {
        for (std::size_t layer = 2; layer <= 3; ++layer) {
            const double proj = mean_inter(k, layer, RecoveryMethod::ProjectionSP);
            const double lay = mean_inter(k, layer, RecoveryMethod::LayeredSP);
            ordering = ordering && proj >= lay;
            if (k == 2 || k == 10) order << fmt(" k=%zu/L%zu %.3f vs %.3f;", k, layer, proj, lay);
        }
    }

    // what certification would need: margin > 0  <=>  |g_min| > eps0 / (w mu ((1 + 1/mu)/2 - lambda_L))
    const double mu = prof.effective.back();
    const double w = prof.effective_norm_min.back();
    const double eps0 = eps0_sum / static_cast<double>(records.size());
    const double room = 0.5 * (1.0 + 1.0 / mu) - 1.0;
    const std::string need = room > 0.0 ? fmt("|g_min| > %.3g", eps0 / (w * mu * room))
                                        : std::string("no |g_min| suffices, since (1+1/mu)/2 <= 1");

    std::ostringstream out;
    out << fmt("certified %zu/%zu trials, %zu within bound; ", certified, records.size(), passed);
    out << fmt("mu(D^(2))=%.3f mu(D^(3))=%.3f, mean eps0=%.3f, best margin %.3g, margin>0 at lambda_L=1 needs %s; ",
               prof.effective[1], prof.effective[2], eps0, margin_best, need.c_str());
    out << "projection-sp vs layered-sp mean intersection" << order.str() << " ordering " << (ordering ? "holds" : "violated");
    if (certified) out << fmt("; certified layer-3 intersection %.4f", inter3 / static_cast<double>(certified));
    // an empty certified set makes the 100% requirement vacuous and is reported as a failure
    const bool pass = certified > 0 && passed == certified && ordering && inter3 / static_cast<double>(certified) >= 0.99;
    return {pass, out.str()};
}

// ------------------------------------------------------------------ 6

Outcome projection_feasibility() {
    Rng rng(1006);
    Rng build = make_rng(7, 0);
    const MLCSCModel synthetic = build_synthetic_model({}, build);
    const MLCSCModel conv = build_random_conv_model(SignalGeometry(64, 1), planted_architecture(), 3, build);
    std::size_t inputs = 0, members = 0, monotone = 0;
    for (const MLCSCModel* model : {&synthetic, &conv}) {
        const MLCSCModel other = [&] {
            Rng r2(99);
            return model == &conv ? build_random_conv_model(SignalGeometry(64, 1), planted_architecture(), 3, r2)
                                  : build_synthetic_model({}, r2);
        }();
        for (int t = 0; t < 100; ++t) {
            DenseVec y = random_dense(model->geometry(), rng);
            if (t % 2) {
                // off-model: a sample from a different model of the same shape plus noise
                y = sample(other, 1 + t % 5, rng).x + 0.1 * y;
            }
            const Projection p = ml_csc_project(y, *model);
            ++inputs;
            members += membership(*model, p.stack).member ? 1 : 0;
            bool mono = true;
            for (std::size_t i = 1; i < p.residual_norms.size(); ++i)
                mono = mono && p.residual_norms[i] <= p.residual_norms[i - 1] * (1.0 + 1e-12);
            monotone += mono ? 1 : 0;
        }
    }
    return {members == inputs && monotone == inputs,
            fmt("%zu inputs (noise and off-model, synthetic and convolutional models): %zu members, %zu non-increasing residuals",
                inputs, members, monotone)};
}

// ------------------------------------------------------------------ 7

Outcome planted_learning() {
    const auto specs = planted_architecture();
    Rng rng = make_rng(3, 0);
    const MLCSCModel planted = build_random_conv_model(SignalGeometry(64, 1), specs, 3, rng);
    std::vector<DenseVec> data;
    for (int s = 0; s < 1024; ++s) data.push_back(sample(planted, 3, rng).x);
    std::vector<ConvLayer> init;
    for (std::size_t i = 1; i <= planted.depth(); ++i) init.push_back(perturb_layer(planted.layer(i), 0.05, rng));
    const MLCSCModel start = planted.with_layers(init);

    // finite-difference pre-gate on the starting model
    double gate = 0.0;
    {
        std::vector<DenseVec> batch(data.begin(), data.begin() + 4);
        std::vector<SparseVec> codes;
        for (std::size_t k = 0; k < batch.size(); ++k)
            codes.push_back(random_sparse(start.level_geometry(start.depth()), 6, rng));
        for (std::size_t i = 1; i <= start.depth(); ++i) {
            const DenseKernels g = data_gradient(batch, start, codes, i);
            const auto fd = oracle::fd_gradient(start.layers(), 64, batch, codes, i);
            double num = 0.0, den = 0.0;
            for (std::size_t f = 0; f < g.size(); ++f)
                for (std::size_t c = 0; c < g[f].size(); ++c) {
                    num += (g[f][c] - fd[f][c]) * (g[f][c] - fd[f][c]);
                    den += fd[f][c] * fd[f][c];
                }
            gate = std::max(gate, std::sqrt(num / den));
        }
    }
    if (!(gate <= 1e-4)) return {false, fmt("gradient pre-gate failed: relative error %.2e > 1e-4", gate)};

    LearnConfig cfg;
    cfg.coder = Method::SubspacePursuit;
    cfg.coder_k = 3;
    cfg.eta = 0.01;
    cfg.momentum = 0.9;
    cfg.batch_size = 32;
    cfg.epochs = 10;
    cfg.rng_seed = 5;
    cfg.zetas = zetas_for(specs);
    const TrainResult r = train(data, start, cfg);

    bool decreasing = true;
    std::ostringstream l2;
    for (std::size_t e = 0; e < r.trace.epochs.size(); ++e) {
        if (e > 0) decreasing = decreasing && r.trace.epochs[e].l2_term < r.trace.epochs[e - 1].l2_term;
        l2 << fmt(e ? " %.4g" : "%.4g", r.trace.epochs[e].l2_term);
    }
    const double first = r.trace.initial.residual;
    const double last = r.trace.epochs.back().residual;
    return {decreasing && last <= 0.5 * first,
            fmt("gradient pre-gate rel. err %.1e; l2 term per epoch [%s] %s; residual %.4g -> %.4g (ratio %.3f, need <= 0.5)",
                gate, l2.str().c_str(), decreasing ? "strictly decreasing" : "NOT strictly decreasing", first, last,
                last / first)};
}

// ------------------------------------------------------------------ 8

Outcome mnist_learning() {
    const std::string path = std::string(MLCSC_DATA_DIR) + "/mnist5k-images-idx3-ubyte.gz";
    const auto data = idx_to_signals(read_idx(path), true);
    const auto specs = mnist_architecture();
    Rng rng = make_rng(1, 0);
    const MLCSCModel m = build_random_conv_model(data.front().geometry(), specs, std::vector<std::size_t>(3, 1), rng);
    LearnConfig cfg;
    cfg.coder = Method::FISTA;
    cfg.coder_iters = 100;
    cfg.eta = 0.1;
    cfg.batch_size = 100;
    cfg.epochs = 2;
    cfg.rng_seed = 2;
    cfg.lambda_l1 = 0.1;
    cfg.target_nnz = 15.0;
    cfg.zetas = zetas_for(specs);
    cfg.threads = 0;
    const TrainResult r = train(data, m, cfg);

    bool decreasing = r.trace.initial.loss > r.trace.epochs.front().loss;
    for (std::size_t e = 1; e < r.trace.epochs.size(); ++e)
        decreasing = decreasing && r.trace.epochs[e].loss < r.trace.epochs[e - 1].loss;
    const double s2 = r.model.layer(2).sparsity();
    const double s3 = r.model.layer(3).sparsity();

    const std::vector<DenseVec> sub(data.begin(), data.begin() + 1000);
    const auto curve = mterm_curve(r.model, sub, {5, 10, 15, 25}, 100, 0);
    std::ostringstream c;
    for (const auto& p : curve) c << fmt(" k=%zu:%.4f", p.k, p.mean_rel_error);
    const bool mono = non_increasing(curve);

    return {decreasing && s2 >= 0.95 && s3 >= 0.95 && mono,
            fmt("%zu digits, lambda %.4g; loss %.4g -> %.4g -> %.4g %s; sparsity L2 %.4f L3 %.4f (need >= 0.95); "
                "M-term on 1000 digits%s %s",
                data.size(), r.trace.initial.lambda_l1, r.trace.initial.loss, r.trace.epochs[0].loss,
                r.trace.epochs[1].loss, decreasing ? "(decreasing)" : "(NOT decreasing)", s2, s3, c.str().c_str(),
                mono ? "(non-increasing)" : "(NOT non-increasing)")};
}

// ------------------------------------------------------------------ 9

Outcome bound_values() {
    std::vector<std::string> bad;
    auto check = [&](const char* what, double got, double want) {
        if (!(std::abs(got - want) <= 1e-12)) bad.push_back(fmt("%s=%.15g want %.15g", what, got, want));
    };
    const double e0 = 0.1;
    const auto t4 = bound_thm4({0.01, 0.01, 0.01}, {5, 5, 5}, e0);
    for (std::size_t i = 1; i <= 3; ++i) check("thm4", t4.at(i).value, 0.04 / 0.91);
    const auto alt = bound_thm4_alt(0.01, {0.1, 0.05, 0.05}, {3, 3, 3}, e0);
    check("thm4_alt L1 inflation", alt.at(1).value / alt.at(3).value, 1.5625);
    check("thm4_alt L3", alt.at(3).value, 0.04 / 0.95);
    const auto t6 = bound_thm6(0.01, {0.01, 0.01, 0.01}, {5, 5, 5}, {1, 2, 2}, 0.02, 4);
    check("thm6 L3", t6.at(3).value, 0.3);
    check("thm6 L2", t6.at(2).value, 0.3 * std::sqrt(3.0));
    Thm7Inputs in{0.01, {0.01, 0.01, 0.01}, {5, 5, 5}, e0, 0.01, 1.0, 1.0};
    const auto t7 = bound_thm7(in);
    check("thm7 L1", t7.at(1).value, 0.0234375);
    check("thm7 L3", t7.at(3).value, 0.01 / 0.96);
    const auto dcp = bound_dcp_layered({0.01, 0.01, 0.01}, {5, 5, 5}, e0);
    check("dcp L3", dcp.at(3).value, 0.64 / (0.91 * 0.91 * 0.91));
    const bool certified = t7.margin > 0.0 && t7.all_hypotheses();
    const bool contrast = dcp.at(3).value > t4.at(3).value;
    std::string detail = fmt("%zu hand values off; instance margin %.2f; layer 3: dcp %.6f > thm4 %.6f %s",
                             bad.size(), t7.margin, dcp.at(3).value, t4.at(3).value, contrast ? "holds" : "FAILS");
    for (const auto& b : bad) detail += "; " + b;
    return {bad.empty() && certified && contrast, detail};
}

// ----------------------------------------------------------------- 10

Outcome idx_round_trip() {
    std::vector<std::string> bad;
    std::vector<std::uint8_t> px;
    for (int i = 0; i < 2 * 3 * 5; ++i) px.push_back(static_cast<std::uint8_t>(i * 7 + 1));
    const std::string fixture = serialize_idx_images(2, 3, 5, px);
    const IdxImages img = parse_idx_images(fixture);
    if (img.count != 2 || img.rows != 3 || img.cols != 5) bad.push_back("dimensions");
    for (std::size_t i = 0; i < px.size(); ++i)
        if (img.pixels[i] != px[i] / 255.0) {
            bad.push_back("pixel values");
            break;
        }
    const std::string labels_fixture{0, 0, 8, 1, 0, 0, 0, 2, 4, 2};
    if (parse_idx_labels(labels_fixture) != std::vector<std::uint8_t>{4, 2}) bad.push_back("labels");

    auto expect_error = [&](const char* what, const std::string& bytes, std::size_t offset, const char* text) {
        try {
            parse_idx_images(bytes);
            bad.push_back(fmt("%s: accepted", what));
        } catch (const ParseError& e) {
            if (e.offset() != offset || std::string(e.what()).find(text) == std::string::npos)
                bad.push_back(fmt("%s: '%s' at %zu", what, e.what(), e.offset()));
        }
    };
    expect_error("empty", "", 0, "empty IDX file");
    expect_error("label magic", labels_fixture, 0, "bad IDX magic");
    expect_error("short header", fixture.substr(0, 9), 9, "truncated");
    expect_error("truncated payload", fixture.substr(0, fixture.size() - 1), fixture.size() - 1, "truncated IDX image payload");

    const IdxImages digits = read_idx(std::string(MLCSC_DATA_DIR) + "/mnist5k-images-idx3-ubyte.gz");
    if (digits.count != 5000 || digits.rows != 28 || digits.cols != 28) bad.push_back("bundled digit subset shape");

    std::string detail = fmt("crafted 2x3x5 images and labels, 4 malformed inputs, bundled 5000x28x28 subset: %zu problems",
                             bad.size());
    for (const auto& b : bad) detail += "; " + b;
    return {bad.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance gate"};
    std::vector<int> only;
    app.add_option("--only", only, "criterion number (repeatable)")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "operator/oracle equivalence", 10, operator_equivalence},
        {2, "effective atom support growth", 5, support_growth},
        {3, "local one-sided near isometry", 60, local_isometry},
        {4, "OMP noiseless guarantee", 30, omp_guarantee},
        {5, "certified noisy recovery", 600, certified_recovery},
        {6, "projection feasibility", 120, projection_feasibility},
        {7, "planted learning", 300, planted_learning},
        {8, "digit learning at desk scale", 1200, mnist_learning},
        {9, "bound evaluators", 1, bound_values},
        {10, "IDX round trip", 1, idx_round_trip},
    };

    bool ok = true;
    for (const auto& c : all) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = o.pass && in_time;
        ok = ok && pass;
        std::printf("criterion %2d %-32s %s  (%.2fs, limit %.0fs%s)  %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                    c.limit_s, in_time ? "" : ", TOO SLOW", o.detail.c_str());
        std::fflush(stdout);
    }
    return ok ? 0 : 1;
}
