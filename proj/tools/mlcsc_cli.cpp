// mlcsc: command-line harness for multi-layer convolutional sparse coding.
//
//   mlcsc init      --arch synthetic --seed 1 --out run/
//   mlcsc sample    --model run/model.mlcsc --count 500 --nnz 5 --seed 2 --out run/
//   mlcsc recover   --model run/model.mlcsc --k 1:10 --trials 100 --seed 3 --out run/
//   mlcsc train     --data data/mnist5k-images-idx3-ubyte.gz --center --arch mnist --seed 4 --out run/
//   mlcsc mterm     --model run/model.mlcsc --data ... --k 5,10,15,25 --out run/
//   mlcsc bounds | coherence | project | pursue ...
//
// Every command writes CSV files into --out (created if missing).

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlcsc/mlcsc.hpp"

namespace fs = std::filesystem;
using namespace mlcsc;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

std::size_t to_size(const std::string& s) {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw UsageError("not a non-negative integer: " + s);
    return static_cast<std::size_t>(v);
}

double to_double(const std::string& s) {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw UsageError("not a number: " + s);
    return v;
}

/// "5,10,15" or "1:10" (inclusive) or a mix such as "1:4,8".
std::vector<std::size_t> parse_grid(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& part : split(s, ',')) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) {
            out.push_back(to_size(part));
            continue;
        }
        const std::size_t lo = to_size(part.substr(0, colon));
        const std::size_t hi = to_size(part.substr(colon + 1));
        if (hi < lo) throw UsageError("empty range: " + part);
        for (std::size_t k = lo; k <= hi; ++k) out.push_back(k);
    }
    return out;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    for (const auto& part : split(s, ',')) out.push_back(to_double(part));
    return out;
}

/// "LEN" or "LENxCH".
SignalGeometry parse_geometry(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) return SignalGeometry(to_size(s), 1);
    return SignalGeometry(to_size(s.substr(0, x)), to_size(s.substr(x + 1)));
}

/// Named architectures or "filters:n:stride[:keep],...".
std::vector<ConvLayerSpec> parse_arch(const std::string& s) {
    if (s == "mnist") return mnist_architecture();
    if (s == "planted") return planted_architecture();
    std::vector<ConvLayerSpec> out;
    for (const auto& layer : split(s, ',')) {
        const auto f = split(layer, ':');
        if (f.size() < 3 || f.size() > 4) throw UsageError("layer spec must be filters:n:stride[:keep], got " + layer);
        out.push_back({to_size(f[0]), to_size(f[1]), to_size(f[2]), f.size() == 4 ? to_double(f[3]) : 1.0});
    }
    if (out.empty()) throw UsageError("empty architecture");
    return out;
}

SignalGeometry default_geometry(const std::string& arch) {
    if (arch == "mnist") return {28, 28};
    if (arch == "planted") return {64, 1};
    return {200, 1};
}

bool looks_like_idx(const std::string& path) {
    return path.find("idx") != std::string::npos || path.ends_with(".gz");
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw UsageError(std::string(what) + " path is required");
    if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path);
}

std::string prepare_out(const std::string& dir) {
    if (dir.empty()) throw UsageError("--out is required");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw UsageError("cannot create output directory " + dir);
    return dir;
}

std::string join(const std::string& dir, const char* file) { return (fs::path(dir) / file).string(); }

struct Common {
    std::string model;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t threads = default_threads();
};

std::uint64_t need_seed(const Common& c) {
    if (!c.seed) throw UsageError("--seed is required for this command");
    return *c.seed;
}

std::vector<DenseVec> load_dataset(const std::string& path, std::optional<SignalGeometry> geometry, bool center,
                                   std::size_t limit) {
    std::vector<DenseVec> data;
    if (looks_like_idx(path)) {
        data = idx_to_signals(read_idx(path), center, limit);
        if (geometry && !data.empty()) require_same_geometry(data.front().geometry(), *geometry, "dataset");
        return data;
    }
    if (!geometry) throw UsageError("signal matrices need --model (or --signal) to know their geometry");
    data = load_signals(path, *geometry);
    if (limit && data.size() > limit) data.resize(limit);
    if (center && !data.empty()) {
        DenseVec mean(*geometry);
        for (const auto& s : data) mean += s;
        mean *= 1.0 / static_cast<double>(data.size());
        for (auto& s : data) s -= mean;
    }
    return data;
}

std::vector<std::string> per_layer(const char* stem, std::size_t L) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= L; ++i) out.push_back(std::string(stem) + std::to_string(i));
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

void print_model(const MLCSCModel& m) {
    std::printf("signal %zux%zu, %zu layers\n", m.geometry().spatial_len, m.geometry().channels, m.depth());
    for (std::size_t i = 1; i <= m.depth(); ++i) {
        const auto& l = m.layer(i);
        std::printf("  layer %zu: %zu -> %zu channels, n=%zu stride=%zu nnz=%zu sparsity=%.4f lambda=%zu\n", i,
                    l.m_in(), l.m_out(), l.n(), l.stride(), l.nnz(), l.sparsity(), m.lambda(i));
    }
    const auto checks = dict_sparsity_check(m, [&] {
        std::vector<std::size_t> v;
        for (std::size_t i = 1; i <= m.depth(); ++i) v.push_back(m.lambda(i));
        return v;
    }());
    std::printf("  dictionary sparsity condition: %s\n", all_pass(checks) ? "holds" : "violated");
}

// ------------------------------------------------------------------- init

struct InitArgs {
    std::string arch = "synthetic";
    std::string signal;
    std::size_t lambda_last = 0;
};

int cmd_init(const Common& c, const InitArgs& a) {
    const std::string out = prepare_out(c.out);
    Rng rng = make_rng(need_seed(c), 0);
    MLCSCModel model = [&] {
        if (a.arch == "synthetic") {
            SyntheticSpec spec;
            if (!a.signal.empty()) spec.signal_len = parse_geometry(a.signal).spatial_len;
            if (a.lambda_last) spec.lambda_last = a.lambda_last;
            return build_synthetic_model(spec, rng);
        }
        const SignalGeometry g = a.signal.empty() ? default_geometry(a.arch) : parse_geometry(a.signal);
        return build_random_conv_model(g, parse_arch(a.arch), a.lambda_last ? a.lambda_last : 3, rng);
    }();
    save_model(model, join(out, "model.mlcsc"));
    print_model(model);
    return 0;
}

// ----------------------------------------------------------------- sample

struct SampleArgs {
    std::size_t count = 0;
    std::size_t nnz = 1;
    double sigma = 0.0;
};

int cmd_sample(const Common& c, const SampleArgs& a) {
    require_file(c.model, "model");
    const std::string out = prepare_out(c.out);
    const std::uint64_t seed = need_seed(c);
    const MLCSCModel model = load_model(c.model);
    const std::size_t L = model.depth();

    std::vector<Sample> samples(a.count);
    std::vector<DenseVec> noisy(a.count);
    parallel_for(a.count, c.threads, [&](std::size_t i) {
        Rng rng = make_rng(seed, i);
        samples[i] = sample(model, a.nnz, rng);
        noisy[i] = samples[i].x;
        if (a.sigma > 0.0)
            for (double& v : noisy[i].raw()) v += a.sigma * standard_normal(rng);
    });

    CsvWriter stacks({"sample", "layer", "index", "value"});
    CsvWriter members(concat({"sample", "member"}, per_layer("l0inf_", L)));
    std::size_t pass = 0;
    for (std::size_t i = 0; i < a.count; ++i) {
        append_stack_rows(stacks, i, samples[i].stack);
        const auto rep = membership(model, samples[i].stack);
        pass += rep.member ? 1 : 0;
        std::vector<std::string> cells{std::to_string(i), rep.member ? "1" : "0"};
        for (auto v : rep.l0inf) cells.push_back(std::to_string(v));
        members.row_strings(cells);
    }
    std::vector<DenseVec> clean;
    for (const auto& s : samples) clean.push_back(s.x);
    save_signals(clean, join(out, "signals.bin"), model.geometry().size());
    if (a.sigma > 0.0) save_signals(noisy, join(out, "noisy.bin"), model.geometry().size());
    stacks.save(join(out, "stacks.csv"));
    members.save(join(out, "membership.csv"));
    std::printf("sampled %zu signals with nnz_L=%zu; membership %zu/%zu pass\n", a.count, a.nnz, pass, a.count);
    return pass == a.count ? 0 : 1;
}

// ---------------------------------------------------------------- recover

struct RecoverArgs {
    std::string k = "1:10";
    double sigma = 0.02;
    std::size_t trials = 100;
};

int cmd_recover(const Common& c, const RecoverArgs& a) {
    require_file(c.model, "model");
    const std::string out = prepare_out(c.out);
    RecoveryOptions opts;
    opts.seed = need_seed(c);
    opts.sigma = a.sigma;
    opts.trials = a.trials;
    opts.threads = c.threads;
    const MLCSCModel model = load_model(c.model);
    const std::size_t L = model.depth();
    const auto ks = parse_grid(a.k);

    const auto records = run_recovery(model, ks, opts);

    CsvWriter summary({"k", "layer", "method", "mean_rel_error", "mean_intersection", "trials", "failures"});
    if (a.trials > 0) {
        for (const auto& r : summarize_recovery(records, ks, L)) {
            summary.row(r.k, r.layer, to_string(r.method), r.mean_rel_error, r.mean_intersection, r.trials, r.failures);
        }
    }
    auto header = std::vector<std::string>{"k", "trial", "e0", "eps0", "margin", "certified", "full_hypotheses",
                                           "pass"};
    header = concat(header, per_layer("bound_", L));
    header = concat(header, per_layer("relaxed_", L));
    header = concat(header, per_layer("sq_error_", L));
    header = concat(header, per_layer("contained_", L));
    header = concat(header, per_layer("intersection_", L));
    CsvWriter trials(header);
    std::size_t certified = 0, passed = 0;
    for (const auto& r : records) {
        const auto& omp = r.methods.front();
        std::vector<std::string> cells{std::to_string(r.k), std::to_string(r.trial), CsvWriter::format(r.e0),
                                       CsvWriter::format(r.eps0), CsvWriter::format(r.thm7.margin),
                                       CsvWriter::format(r.thm7.certified), CsvWriter::format(r.thm7.full_hypotheses),
                                       r.thm7.certified ? CsvWriter::format(r.thm7.pass) : std::string()};
        for (double v : r.thm7.bound) cells.push_back(CsvWriter::format(v));
        for (double v : r.thm7.relaxed) cells.push_back(CsvWriter::format(v));
        for (double v : omp.sq_error) cells.push_back(CsvWriter::format(v));
        for (bool v : omp.contained) cells.push_back(CsvWriter::format(v));
        for (const auto& m : omp.metrics) cells.push_back(CsvWriter::format(m.intersection));
        trials.row_strings(cells);
        if (r.thm7.certified) {
            ++certified;
            passed += r.thm7.pass ? 1 : 0;
        }
    }
    summary.save(join(out, "recovery.csv"));
    trials.save(join(out, "recovery_trials.csv"));
    std::printf("%zu trials; certified %zu, of which %zu within the bound\n", records.size(), certified, passed);
    return 0;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
    std::string data;
    std::string arch;
    std::string signal;
    bool center = false;
    std::size_t limit = 0;
    std::size_t lambda_last = 3;
    std::size_t epochs = 20;
    std::size_t batch = 100;
    double eta = 1.0;
    double momentum = 0.9;
    double iota = 0.001;
    std::size_t T = 1;
    double lambda = 0.1;
    std::optional<double> target_nnz;
    std::string coder = "fista";
    std::size_t coder_k = 15;
    std::size_t coder_iters = 200;
    std::string keep;  // kept fraction per layer >= 2, overrides the architecture
};

int cmd_train(const Common& c, const TrainArgs& a) {
    require_file(a.data, "dataset");
    if (!c.model.empty()) require_file(c.model, "model");
    if (c.model.empty() && a.arch.empty()) throw UsageError("train needs --model (initial dictionaries) or --arch");
    const std::string out = prepare_out(c.out);
    const std::uint64_t seed = need_seed(c);

    std::optional<MLCSCModel> init;
    std::vector<ConvLayerSpec> specs;
    if (!c.model.empty()) {
        init = load_model(c.model);
        for (const auto& l : init->layers()) specs.push_back({l.m_out(), l.n(), l.stride(), 1.0 - l.sparsity()});
    } else {
        specs = parse_arch(a.arch);
    }
    if (!a.keep.empty()) {
        const auto keep = parse_doubles(a.keep);
        if (keep.size() + 1 != specs.size()) throw UsageError("--keep needs one fraction per layer after the first");
        for (std::size_t i = 1; i < specs.size(); ++i) specs[i].keep = keep[i - 1];
    }
    const std::optional<SignalGeometry> geometry =
        init ? std::optional(init->geometry())
             : (a.signal.empty() ? std::nullopt : std::optional(parse_geometry(a.signal)));
    const auto data = load_dataset(a.data, geometry, a.center, a.limit);
    if (data.empty()) throw UsageError("dataset is empty");
    if (!init) {
        Rng rng = make_rng(seed, 0);
        init = build_random_conv_model(data.front().geometry(), specs, a.lambda_last, rng);
    }

    LearnConfig cfg;
    cfg.lambda_l1 = a.lambda;
    cfg.target_nnz = a.target_nnz;
    cfg.zetas = zetas_for(specs);
    cfg.eta = a.eta;
    cfg.momentum = a.momentum;
    cfg.T = a.T;
    cfg.iota = a.iota;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.rng_seed = seed;
    cfg.coder = parse_method(a.coder);
    cfg.coder_k = a.coder_k;
    cfg.coder_iters = a.coder_iters;
    cfg.threads = c.threads;

    const std::size_t L = init->depth();
    CsvWriter trace(concat({"epoch", "loss", "l2_term", "residual", "code_nnz", "lambda_l1"}, per_layer("sparsity_", L)));
    auto add = [&](const EpochRecord& r) {
        std::vector<std::string> cells{std::to_string(r.epoch), CsvWriter::format(r.loss), CsvWriter::format(r.l2_term),
                                       CsvWriter::format(r.residual), CsvWriter::format(r.code_nnz),
                                       CsvWriter::format(r.lambda_l1)};
        for (double s : r.sparsity) cells.push_back(CsvWriter::format(s));
        trace.row_strings(cells);
    };
    const TrainResult result = train(data, *init, cfg, [](const EpochRecord& r) {
        std::printf("epoch %zu: loss %.6g  l2 %.6g  residual %.6g  nnz %.2f\n", r.epoch, r.loss, r.l2_term, r.residual,
                    r.code_nnz);
        std::fflush(stdout);
    });
    add(result.trace.initial);
    for (const auto& r : result.trace.epochs) add(r);

    save_model(result.model, join(out, "model.mlcsc"));
    trace.save(join(out, "trace.csv"));
    std::ostringstream side;
    side << "data = " << a.data << "\ncenter = " << (a.center ? "true" : "false") << "\nsamples = " << data.size()
         << "\nseed = " << seed << "\nepochs = " << cfg.epochs << "\nbatch = " << cfg.batch_size
         << "\neta = " << cfg.eta << "\nmomentum = " << cfg.momentum << "\niota = " << cfg.iota << "\nT = " << cfg.T
         << "\ncoder = " << to_string(cfg.coder) << "\ncoder_iters = " << cfg.coder_iters
         << "\nlambda = " << (result.trace.epochs.empty() ? result.trace.initial.lambda_l1
                                                          : result.trace.epochs.back().lambda_l1)
         << "\n";
    detail::write_file(join(out, "train_config.txt"), side.str());
    print_model(result.model);
    return 0;
}

// ------------------------------------------------------------------ mterm

struct MtermArgs {
    std::string data;
    bool center = false;
    std::size_t limit = 0;
    std::string k = "5,10,15,25";
    std::size_t iters = 100;
};

int cmd_mterm(const Common& c, const MtermArgs& a) {
    require_file(c.model, "model");
    require_file(a.data, "dataset");
    const std::string out = prepare_out(c.out);
    const MLCSCModel model = load_model(c.model);
    const auto data = load_dataset(a.data, model.geometry(), a.center, a.limit);
    const auto curve = mterm_curve(model, data, parse_grid(a.k), a.iters, c.threads);
    CsvWriter csv({"k", "mean_rel_error"});
    for (const auto& p : curve) csv.row(p.k, p.mean_rel_error);
    csv.save(join(out, "mterm.csv"));
    for (const auto& p : curve) std::printf("k=%zu  mean relative error %.6g\n", p.k, p.mean_rel_error);
    const bool mono = non_increasing(curve);
    std::printf("curve non-increasing: %s\n", mono ? "yes" : "no");
    return mono ? 0 : 1;
}

// ----------------------------------------------------------------- bounds

struct BoundsArgs {
    std::string e0 = "0.1";
    std::string eps0;
    std::string lambdas;
    std::string mu_eff;
    std::string mu;
    std::string c;
    double gamma_min = 1.0;
    double nnz_patch = 1.0;
    double atom_norm_min = 1.0;
};

int cmd_bounds(const Common& c, const BoundsArgs& a) {
    if (!c.model.empty()) require_file(c.model, "model");
    const std::string out = prepare_out(c.out);
    std::vector<double> mu_eff, mu, lambdas, cs;
    if (!c.model.empty()) {
        const MLCSCModel model = load_model(c.model);
        const auto prof = coherence_profile(model);
        mu_eff = prof.effective;
        mu = prof.layer;
        cs = layer_cs(model);
        for (std::size_t i = 1; i <= model.depth(); ++i) lambdas.push_back(static_cast<double>(model.lambda(i)));
    }
    if (!a.mu_eff.empty()) mu_eff = parse_doubles(a.mu_eff);
    if (!a.mu.empty()) mu = parse_doubles(a.mu);
    if (!a.lambdas.empty()) lambdas = parse_doubles(a.lambdas);
    if (!a.c.empty()) cs = parse_doubles(a.c);
    if (lambdas.empty()) throw UsageError("bounds needs --model or --lambdas/--mu/--mu-eff");
    if (cs.empty()) cs.assign(lambdas.size(), 1.0);
    if (mu.size() != lambdas.size() || mu_eff.size() != lambdas.size() || cs.size() != lambdas.size()) {
        throw UsageError("--lambdas, --mu, --mu-eff and --c need one value per layer");
    }
    const auto e0s = parse_doubles(a.e0);
    const auto eps0s = a.eps0.empty() ? e0s : parse_doubles(a.eps0);
    if (eps0s.size() != e0s.size()) throw UsageError("--eps0 needs one value per --e0 scenario");

    CsvWriter csv({"scenario", "e0", "eps0", "theorem", "units", "layer", "hypothesis", "value", "sqrt_value",
                   "relaxed", "product", "margin"});
    for (std::size_t s = 0; s < e0s.size(); ++s) {
        Thm7Inputs t7{mu_eff.back(), mu, lambdas, e0s[s], eps0s[s], a.gamma_min, a.atom_norm_min};
        const std::vector<BoundReport> reports{
            bound_thm4(mu_eff, lambdas, e0s[s]), bound_thm4_alt(mu_eff.back(), mu, lambdas, e0s[s]),
            bound_thm6(mu_eff.back(), mu, lambdas, cs, eps0s[s], a.nnz_patch), bound_thm7(t7),
            bound_dcp_layered(mu, lambdas, e0s[s])};
        for (const auto& r : reports) {
            for (const auto& b : r.layers) {
                csv.row(s, e0s[s], eps0s[s], r.theorem, r.units, b.layer, b.hypothesis, b.value, std::sqrt(b.value),
                        b.relaxed, b.product, r.margin);
            }
        }
    }
    csv.save(join(out, "bounds.csv"));
    std::fputs(csv.str().c_str(), stdout);
    return 0;
}

// -------------------------------------------------------------- coherence

struct CoherenceArgs {
    std::size_t rip_k = 0;
    std::size_t rip_trials = 200;
};

int cmd_coherence(const Common& c, const CoherenceArgs& a) {
    require_file(c.model, "model");
    const std::string out = prepare_out(c.out);
    const MLCSCModel model = load_model(c.model);
    const auto prof = coherence_profile(model);
    const auto cs = layer_cs(model);
    CsvWriter csv({"layer", "mu_layer", "mu_effective", "c", "effective_atom_size", "effective_norm_min",
                   "effective_norm_max", "rip_k", "rip_estimate", "rip_coherence_bound"});
    std::optional<std::uint64_t> seed = c.seed;
    if (a.rip_k && !seed) throw UsageError("--rip-k needs --seed");
    for (std::size_t i = 1; i <= model.depth(); ++i) {
        double est = kNaN, bound = kNaN;
        if (a.rip_k) {
            Rng rng = make_rng(*seed, i);
            est = estimate_stripe_rip(model.effective(i), a.rip_k, a.rip_trials, rng);
            bound = coherence_rip_bound(a.rip_k, prof.effective[i - 1]);
        }
        csv.row(i, prof.layer[i - 1], prof.effective[i - 1], cs[i - 1], model.effective(i).atom_size(),
                prof.effective_norm_min[i - 1], prof.effective_norm_max[i - 1], a.rip_k, est, bound);
    }
    csv.save(join(out, "coherence.csv"));
    std::fputs(csv.str().c_str(), stdout);
    return 0;
}

// ------------------------------------------------------ project / pursue

struct SignalArgs {
    std::string data;
    bool center = false;
    std::size_t limit = 0;
};

int cmd_project(const Common& c, const SignalArgs& a) {
    require_file(c.model, "model");
    require_file(a.data, "dataset");
    const std::string out = prepare_out(c.out);
    const MLCSCModel model = load_model(c.model);
    const auto data = load_dataset(a.data, model.geometry(), a.center, a.limit);
    std::vector<Projection> proj(data.size());
    parallel_for(data.size(), c.threads, [&](std::size_t i) { proj[i] = ml_csc_project(data[i], model); });

    CsvWriter csv({"sample", "accepted_k", "signal_norm", "residual", "stopped_on_violation", "member"});
    CsvWriter stacks({"sample", "layer", "index", "value"});
    std::size_t members = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const bool m = membership(model, proj[i].stack).member;
        members += m ? 1 : 0;
        csv.row(i, proj[i].accepted_k, data[i].norm(), proj[i].residual_norms.back(), proj[i].stopped_on_violation, m);
        append_stack_rows(stacks, i, proj[i].stack);
    }
    csv.save(join(out, "project.csv"));
    stacks.save(join(out, "project_stacks.csv"));
    std::printf("projected %zu signals; %zu/%zu estimates in the model\n", data.size(), members, data.size());
    return 0;
}

struct PursueArgs {
    SignalArgs sig;
    std::string method = "omp";
    std::optional<std::size_t> k;
    std::string layered_k;
    double lambda = 0.1;
    std::size_t max_iters = 1000;
};

int cmd_pursue(const Common& c, const PursueArgs& a) {
    require_file(c.model, "model");
    require_file(a.sig.data, "dataset");
    const std::string out = prepare_out(c.out);
    const MLCSCModel model = load_model(c.model);
    const auto data = load_dataset(a.sig.data, model.geometry(), a.sig.center, a.sig.limit);
    PursuitConfig cfg;
    cfg.method = parse_method(a.method);
    cfg.k = a.k;
    cfg.lambda_l1 = a.lambda;
    cfg.max_iters = a.max_iters;
    const auto layered = a.layered_k.empty() ? std::vector<std::size_t>{} : parse_grid(a.layered_k);
    if (!layered.empty() && layered.size() != model.depth()) throw UsageError("--layered-k needs one value per layer");
    if (layered.empty() && cfg.method != Method::FISTA && !cfg.k) throw UsageError("--k is required for this method");

    const std::size_t L = model.depth();
    std::vector<std::vector<SparseVec>> reps(data.size());
    parallel_for(data.size(), c.threads, [&](std::size_t i) {
        if (layered.empty()) {
            reps[i] = ml_csc_pursuit(data[i], model, std::nullopt, cfg).reps;
        } else {
            reps[i] = layered_pursuit(data[i], model, layered, cfg);
        }
    });
    CsvWriter csv(concat({"sample", "residual", "member"}, per_layer("nnz_", L)));
    CsvWriter stacks({"sample", "layer", "index", "value"});
    for (std::size_t i = 0; i < data.size(); ++i) {
        const LayerStack st{reps[i]};
        const DenseVec x = apply(model.layer(1), st.at(1));
        std::vector<std::string> cells{std::to_string(i), CsvWriter::format((data[i] - x).norm()),
                                       CsvWriter::format(membership(model, st).member)};
        for (const auto& r : reps[i]) cells.push_back(std::to_string(r.nnz()));
        csv.row_strings(cells);
        append_stack_rows(stacks, i, st);
    }
    csv.save(join(out, "pursue.csv"));
    stacks.save(join(out, "pursue_stacks.csv"));
    std::printf("coded %zu signals with %s%s\n", data.size(), to_string(cfg.method),
                layered.empty() ? "" : " (layered)");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-layer convolutional sparse coding toolkit"};
    app.set_config("--config", "", "TOML/INI file with option values; command-line flags win");
    app.require_subcommand(1);

    Common common;
    auto shared = [&](CLI::App* sub, bool model = true) {
        if (model) sub->add_option("--model", common.model, "model file");
        sub->add_option("--out", common.out, "output directory")->required();
        sub->add_option("--seed", common.seed, "root seed");
        sub->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
    };

    InitArgs init_a;
    auto* init = app.add_subcommand("init", "build a random model");
    shared(init, false);
    init->add_option("--arch", init_a.arch, "synthetic | mnist | planted | filters:n:stride[:keep],...");
    init->add_option("--signal", init_a.signal, "signal geometry LEN or LENxCH");
    init->add_option("--lambda-last", init_a.lambda_last, "cap on the deepest layer");

    SampleArgs sample_a;
    auto* samp = app.add_subcommand("sample", "draw signals from a model");
    shared(samp);
    samp->add_option("--count", sample_a.count)->required();
    samp->add_option("--nnz", sample_a.nnz, "non-zeros in the deepest representation");
    samp->add_option("--sigma", sample_a.sigma, "also write noisy copies with this noise level");

    RecoverArgs rec_a;
    auto* rec = app.add_subcommand("recover", "noisy recovery sweep: projection vs layered pursuit");
    shared(rec);
    rec->add_option("--k", rec_a.k, "cardinality grid, e.g. 1:10 or 2,4,8");
    rec->add_option("--sigma", rec_a.sigma);
    rec->add_option("--trials", rec_a.trials);

    TrainArgs tr_a;
    auto* tr = app.add_subcommand("train", "online dictionary learning");
    shared(tr);
    tr->add_option("--data", tr_a.data, "IDX images (.gz ok) or signal matrix")->required();
    tr->add_option("--arch", tr_a.arch, "architecture when no --model is given");
    tr->add_option("--signal", tr_a.signal, "geometry of a signal-matrix dataset");
    tr->add_flag("--center", tr_a.center, "subtract the dataset mean");
    tr->add_option("--limit", tr_a.limit, "use the first N samples");
    tr->add_option("--lambda-last", tr_a.lambda_last);
    tr->add_option("--epochs", tr_a.epochs);
    tr->add_option("--batch", tr_a.batch);
    tr->add_option("--eta", tr_a.eta);
    tr->add_option("--momentum", tr_a.momentum);
    tr->add_option("--iota", tr_a.iota);
    tr->add_option("--T", tr_a.T);
    tr->add_option("--lambda", tr_a.lambda, "l1 weight of the coder");
    tr->add_option("--target-nnz", tr_a.target_nnz, "tune --lambda to this mean code cardinality");
    tr->add_option("--coder", tr_a.coder, "fista | omp | sp | iht");
    tr->add_option("--coder-k", tr_a.coder_k);
    tr->add_option("--coder-iters", tr_a.coder_iters);
    tr->add_option("--keep", tr_a.keep, "kept kernel fraction per layer >= 2, comma separated");

    MtermArgs mt_a;
    auto* mt = app.add_subcommand("mterm", "M-term approximation curve with IHT");
    shared(mt);
    mt->add_option("--data", mt_a.data)->required();
    mt->add_flag("--center", mt_a.center);
    mt->add_option("--limit", mt_a.limit);
    mt->add_option("--k", mt_a.k);
    mt->add_option("--iters", mt_a.iters);

    BoundsArgs bd_a;
    auto* bd = app.add_subcommand("bounds", "tabulate stability bounds");
    shared(bd);
    bd->add_option("--e0", bd_a.e0, "noise energy per scenario, comma separated");
    bd->add_option("--eps0", bd_a.eps0, "patch noise level per scenario");
    bd->add_option("--lambdas", bd_a.lambdas);
    bd->add_option("--mu-eff", bd_a.mu_eff, "coherence of D^(i) per layer");
    bd->add_option("--mu", bd_a.mu, "coherence of D_i per layer");
    bd->add_option("--c", bd_a.c, "stripe-cover counts per layer");
    bd->add_option("--gamma-min", bd_a.gamma_min);
    bd->add_option("--nnz-patch", bd_a.nnz_patch);
    bd->add_option("--atom-norm-min", bd_a.atom_norm_min);

    CoherenceArgs co_a;
    auto* co = app.add_subcommand("coherence", "coherence and Stripe-RIP estimates per layer");
    shared(co);
    co->add_option("--rip-k", co_a.rip_k);
    co->add_option("--rip-trials", co_a.rip_trials);

    SignalArgs pj_a;
    auto* pj = app.add_subcommand("project", "greedy projection onto the model");
    shared(pj);
    pj->add_option("--data", pj_a.data)->required();
    pj->add_flag("--center", pj_a.center);
    pj->add_option("--limit", pj_a.limit);

    PursueArgs pu_a;
    auto* pu = app.add_subcommand("pursue", "multi-layer or layered pursuit");
    shared(pu);
    pu->add_option("--data", pu_a.sig.data)->required();
    pu->add_flag("--center", pu_a.sig.center);
    pu->add_option("--limit", pu_a.sig.limit);
    pu->add_option("--method", pu_a.method, "omp | sp | fista | iht");
    pu->add_option("--k", pu_a.k);
    pu->add_option("--layered-k", pu_a.layered_k, "per-layer cardinalities; runs the layered baseline");
    pu->add_option("--lambda", pu_a.lambda);
    pu->add_option("--max-iters", pu_a.max_iters);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*init) return cmd_init(common, init_a);
        if (*samp) return cmd_sample(common, sample_a);
        if (*rec) return cmd_recover(common, rec_a);
        if (*tr) return cmd_train(common, tr_a);
        if (*mt) return cmd_mterm(common, mt_a);
        if (*bd) return cmd_bounds(common, bd_a);
        if (*co) return cmd_coherence(common, co_a);
        if (*pj) return cmd_project(common, pj_a);
        if (*pu) return cmd_pursue(common, pu_a);
    } catch (const UsageError& e) {
        std::cerr << "mlcsc: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "mlcsc: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
