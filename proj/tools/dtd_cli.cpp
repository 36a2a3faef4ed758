// dtd: train/explain/visualize deep Taylor decomposition attributions on
// digit data, plus the synthetic pattern-vs-filter lab and a self-test.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "dtd/dataio.hpp"
#include "dtd/digits.hpp"
#include "dtd/genmodel.hpp"
#include "dtd/heatmap.hpp"
#include "dtd/network.hpp"
#include "dtd/patterns.hpp"
#include "dtd/relevance.hpp"
#include "minitoml.hpp"

namespace fs = std::filesystem;
using namespace dtd;

namespace {

struct ExperimentConfig {
    std::vector<double> noise_levels = {0.0, 0.2, 0.4, 0.6, 0.8};
    std::vector<std::string> rules = {"saliency", "z", "w+", "a+"};
    std::vector<std::size_t> digit_indices;  // empty: first instance of each digit
    std::uint64_t master_seed = 1;
    std::string train_images, train_labels, test_images, test_labels;
    std::string out = "out";
    bool train_on_noisy = true;
    double stabilizer = 0.0;
    double learning_rate = 0.01;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::size_t hidden = 200;
    std::size_t upscale = 4;
};

std::uint64_t derive_seed(std::uint64_t master, const std::string& tag, double sigma) {
    std::uint64_t h = fnv1a(&master, sizeof(master));
    h = fnv1a(tag.data(), tag.size(), h);
    h = fnv1a(&sigma, sizeof(sigma), h);
    return h;
}

std::string sigma_tag(double sigma) {
    std::ostringstream os;
    os << sigma;
    return os.str();
}

std::string model_path(const ExperimentConfig& cfg, double sigma) {
    return cfg.out + "/model_sigma" + sigma_tag(sigma) + ".dtdn";
}
std::string patterns_path(const ExperimentConfig& cfg, double sigma) {
    return cfg.out + "/patterns_sigma" + sigma_tag(sigma) + ".dtdp";
}

void apply_toml(ExperimentConfig& cfg, const std::string& path) {
    const auto table = minitoml::parse_file(path);
    for (const auto& [key, val] : table) {
        if (key == "noise_levels") {
            cfg.noise_levels.clear();
            for (const auto& v : val.as_array()) cfg.noise_levels.push_back(v.as_number());
        } else if (key == "rules") {
            cfg.rules.clear();
            for (const auto& v : val.as_array()) cfg.rules.push_back(v.as_string());
        } else if (key == "digit_indices") {
            cfg.digit_indices.clear();
            for (const auto& v : val.as_array())
                cfg.digit_indices.push_back(std::size_t(v.as_number()));
        } else if (key == "master_seed") {
            cfg.master_seed = std::uint64_t(val.as_number());
        } else if (key == "mnist_images" || key == "train_images") {
            cfg.train_images = val.as_string();
        } else if (key == "mnist_labels" || key == "train_labels") {
            cfg.train_labels = val.as_string();
        } else if (key == "test_images") {
            cfg.test_images = val.as_string();
        } else if (key == "test_labels") {
            cfg.test_labels = val.as_string();
        } else if (key == "out") {
            cfg.out = val.as_string();
        } else if (key == "train_on_noisy") {
            cfg.train_on_noisy = val.as_bool();
        } else if (key == "stabilizer") {
            cfg.stabilizer = val.as_number();
        } else if (key == "learning_rate") {
            cfg.learning_rate = val.as_number();
        } else if (key == "epochs") {
            cfg.epochs = std::size_t(val.as_number());
        } else if (key == "batch_size") {
            cfg.batch_size = std::size_t(val.as_number());
        } else if (key == "hidden") {
            cfg.hidden = std::size_t(val.as_number());
        } else if (key == "upscale") {
            cfg.upscale = std::size_t(val.as_number());
        } else {
            throw FormatError("unknown config key: " + key);
        }
    }
}

Dataset load_clean(const std::string& images, const std::string& labels) {
    if (images.empty() || labels.empty())
        throw FormatError("dataset paths missing (set --mnist-images/--mnist-labels)");
    return load_dataset(images, labels);
}

Dataset noised(const Dataset& clean, double sigma, std::uint64_t seed) {
    return add_gaussian_noise(clean, NoiseConfig{sigma, seed});
}

Vector sample_of(const Dataset& ds, std::size_t index) {
    if (index >= ds.size()) throw DimensionError("sample index out of range");
    const double* row = ds.images.row_ptr(index);
    return Vector(row, row + ds.dim());
}

Rule parse_rule(const std::string& name) {
    const auto r = rule_from_name(name);
    if (!r) throw FormatError("unknown rule: " + name);
    return *r;
}

Matrix as_square_image(const Vector& v) {
    const auto side = std::size_t(std::lround(std::sqrt(double(v.size()))));
    if (side * side != v.size())
        throw DimensionError("relevance vector is not a square image");
    Matrix m(side, side);
    for (std::size_t i = 0; i < v.size(); ++i) m.data()[i] = v[i];
    return m;
}

// ---------------------------------------------------------------- train ----

int cmd_train(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out);
    const Dataset train_clean = load_clean(cfg.train_images, cfg.train_labels);
    std::optional<Dataset> test_clean;
    if (!cfg.test_images.empty())
        test_clean = load_clean(cfg.test_images, cfg.test_labels);

    std::ofstream report(cfg.out + "/train_report.txt", std::ios::app);

    // with --train-on-clean a single clean-data model serves every arm
    std::optional<Mlp> shared_clean_model;
    for (double sigma : cfg.noise_levels) {
        Mlp mlp;
        if (!cfg.train_on_noisy && shared_clean_model) {
            mlp = *shared_clean_model;
        } else {
            const double train_sigma = cfg.train_on_noisy ? sigma : 0.0;
            const Dataset train_ds =
                noised(train_clean, train_sigma,
                       derive_seed(cfg.master_seed, "noise-train", train_sigma));
            mlp = make_mlp(train_ds.dim(), {cfg.hidden}, 10,
                           derive_seed(cfg.master_seed, "init", train_sigma));
            TrainConfig tc;
            tc.learning_rate = cfg.learning_rate;
            tc.epochs = cfg.epochs;
            tc.batch_size = cfg.batch_size;
            tc.seed = derive_seed(cfg.master_seed, "sgd", train_sigma);
            train(mlp, train_ds, tc);
            if (!cfg.train_on_noisy) shared_clean_model = mlp;
        }
        save_model(mlp, model_path(cfg, sigma));

        const Dataset eval_train =
            noised(train_clean, sigma, derive_seed(cfg.master_seed, "noise-train", sigma));
        std::ostringstream line;
        line << "sigma=" << sigma_tag(sigma)
             << " train_acc=" << accuracy(mlp, eval_train);
        if (test_clean) {
            const Dataset eval_test = noised(
                *test_clean, sigma, derive_seed(cfg.master_seed, "noise-eval", sigma));
            line << " test_acc=" << accuracy(mlp, eval_test);
        }
        line << " lr=" << cfg.learning_rate << " epochs=" << cfg.epochs
             << " batch=" << cfg.batch_size << " seed=" << cfg.master_seed;
        report << line.str() << "\n";
        std::cout << line.str() << "\n";
    }
    return 0;
}

// ------------------------------------------------------------- patterns ----

int cmd_patterns(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out);
    const Dataset train_clean = load_clean(cfg.train_images, cfg.train_labels);
    for (double sigma : cfg.noise_levels) {
        const Mlp mlp = load_model(model_path(cfg, sigma));
        const double train_sigma = cfg.train_on_noisy ? sigma : 0.0;
        const Dataset train_ds =
            noised(train_clean, train_sigma,
                   derive_seed(cfg.master_seed, "noise-train", train_sigma));
        const PatternSet ps = estimate_patterns(mlp, train_ds);
        save_patterns(ps, patterns_path(cfg, sigma));
        std::size_t dead = 0;
        for (const auto& layer : ps.degenerate)
            dead += std::size_t(std::count(layer.begin(), layer.end(), true));
        std::cout << "sigma=" << sigma_tag(sigma) << " patterns=" << patterns_path(cfg, sigma)
                  << " degenerate_neurons=" << dead << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- explain ----

void check_fingerprint(const Mlp& mlp, const PatternSet& ps) {
    if (ps.fingerprint.model_hash != model_hash(mlp))
        throw FormatError("pattern file fingerprint does not match the model");
}

void write_relevance_csv(const std::string& path, const Vector& rel, Rule rule,
                         double sigma, std::size_t target) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw FormatError("cannot write " + path);
    f << "rule=" << rule_name(rule) << ",sigma=" << sigma_tag(sigma)
      << ",target=" << target << "\n";
    const auto side = std::size_t(std::lround(std::sqrt(double(rel.size()))));
    const std::size_t cols = (side * side == rel.size()) ? side : rel.size();
    f.precision(17);
    for (std::size_t i = 0; i < rel.size(); ++i)
        f << rel[i] << ((i % cols == cols - 1) ? "\n" : ",");
}

int cmd_explain(const ExperimentConfig& cfg, double sigma, std::size_t index,
                long target_flag, const std::string& rule_name_str,
                const std::string& model_file, const std::string& patterns_file) {
    fs::create_directories(cfg.out);
    const Rule rule = parse_rule(rule_name_str);

    const std::string mpath = model_file.empty() ? model_path(cfg, sigma) : model_file;
    const Mlp mlp = load_model(mpath);

    std::optional<PatternSet> ps;
    if (rule_needs_patterns(rule)) {
        const std::string ppath =
            patterns_file.empty() ? patterns_path(cfg, sigma) : patterns_file;
        ps = load_patterns(ppath);
        check_fingerprint(mlp, *ps);
    }

    const bool have_test = !cfg.test_images.empty();
    const Dataset clean = have_test ? load_clean(cfg.test_images, cfg.test_labels)
                                    : load_clean(cfg.train_images, cfg.train_labels);
    const Dataset eval_ds =
        noised(clean, sigma, derive_seed(cfg.master_seed, "noise-eval", sigma));

    const Vector x = sample_of(eval_ds, index);
    const std::size_t target =
        target_flag >= 0 ? std::size_t(target_flag) : eval_ds.labels[index];

    const RelevanceReport report =
        explain(mlp, x, target, rule, ps ? &*ps : nullptr, cfg.stabilizer);

    const std::string stem = cfg.out + "/relevance_" + rule_name_str + "_sigma" +
                             sigma_tag(sigma) + "_i" + std::to_string(index);
    write_relevance_csv(stem + ".csv", report.input_relevance(), rule, sigma, target);
    const Matrix img = as_square_image(report.input_relevance());
    HeatmapStyle style{cfg.upscale};
    write_png(render_heatmap(img, style), stem + ".png");
    write_pgm_magnitude(img, style, stem + ".pgm");

    std::cout << "rule=" << rule_name_str << " sigma=" << sigma_tag(sigma)
              << " index=" << index << " target=" << target
              << " conservation_residual=" << report.conservation_residual << "\n";
    std::cout << "wrote " << stem << ".{csv,png,pgm}\n";
    return 0;
}

// ----------------------------------------------------------------- grid ----

std::size_t first_index_of_digit(const Dataset& ds, int digit) {
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.labels[i] == digit) return i;
    throw FormatError("dataset contains no sample of digit " + std::to_string(digit));
}

int cmd_grid(const ExperimentConfig& cfg, const std::string& mode, long index_flag,
             long target_flag) {
    fs::create_directories(cfg.out);
    const bool have_test = !cfg.test_images.empty();
    const Dataset clean = have_test ? load_clean(cfg.test_images, cfg.test_labels)
                                    : load_clean(cfg.train_images, cfg.train_labels);

    std::vector<std::vector<GridCell>> grid;
    std::string out_file;

    if (mode == "fig1") {
        // one digit, rules x noise levels
        const std::size_t index =
            index_flag >= 0 ? std::size_t(index_flag) : first_index_of_digit(clean, 4);
        out_file = cfg.out + "/fig1.png";
        for (const auto& rname : cfg.rules) {
            const Rule rule = parse_rule(rname);
            std::vector<GridCell> row;
            for (double sigma : cfg.noise_levels) {
                const Mlp mlp = load_model(model_path(cfg, sigma));
                std::optional<PatternSet> ps;
                if (rule_needs_patterns(rule)) {
                    ps = load_patterns(patterns_path(cfg, sigma));
                    check_fingerprint(mlp, *ps);
                }
                const Dataset eval_ds =
                    noised(clean, sigma, derive_seed(cfg.master_seed, "noise-eval", sigma));
                const std::size_t target = target_flag >= 0 ? std::size_t(target_flag)
                                                            : eval_ds.labels[index];
                const auto report = explain(mlp, sample_of(eval_ds, index), target, rule,
                                            ps ? &*ps : nullptr, cfg.stabilizer);
                row.push_back({as_square_image(report.input_relevance()),
                               rname + " s=" + sigma_tag(sigma)});
            }
            grid.push_back(std::move(row));
        }
    } else if (mode == "fig2") {
        // digits x rules at sigma = 0.2
        const double sigma = 0.2;
        out_file = cfg.out + "/fig2.png";
        const Mlp mlp = load_model(model_path(cfg, sigma));
        const Dataset eval_ds =
            noised(clean, sigma, derive_seed(cfg.master_seed, "noise-eval", sigma));

        std::vector<std::size_t> indices = cfg.digit_indices;
        if (indices.empty())
            for (int d = 0; d < 10; ++d) indices.push_back(first_index_of_digit(clean, d));

        for (std::size_t index : indices) {
            std::vector<GridCell> row;
            const std::size_t target =
                target_flag >= 0 ? std::size_t(target_flag) : eval_ds.labels[index];
            for (const auto& rname : cfg.rules) {
                const Rule rule = parse_rule(rname);
                std::optional<PatternSet> ps;
                if (rule_needs_patterns(rule)) {
                    ps = load_patterns(patterns_path(cfg, sigma));
                    check_fingerprint(mlp, *ps);
                }
                const auto report = explain(mlp, sample_of(eval_ds, index), target, rule,
                                            ps ? &*ps : nullptr, cfg.stabilizer);
                row.push_back({as_square_image(report.input_relevance()),
                               std::to_string(eval_ds.labels[index]) + " " + rname});
            }
            grid.push_back(std::move(row));
        }
    } else {
        throw FormatError("grid mode must be fig1 or fig2");
    }

    write_png(compose_grid(grid, HeatmapStyle{cfg.upscale}), out_file);
    std::cout << "wrote " << out_file << " (" << grid.size() << " x " << grid[0].size()
              << " cells)\n";
    return 0;
}

// ---------------------------------------------------------------- synth ----

int cmd_synth(std::size_t dim, std::size_t distractors, double sigma, std::size_t n,
              std::uint64_t seed, double ridge, const std::string& csv_path) {
    const GenerativeSpec spec = make_lab_spec(dim, distractors, sigma, seed);
    const auto report = pattern_vs_filter_demo(spec, n, ridge);

    std::printf("pattern-vs-filter lab: D=%zu K=%zu sigma=%g N=%zu seed=%llu\n", dim,
                distractors, sigma, n, static_cast<unsigned long long>(seed));
    std::printf("%-22s %12s\n", "quantity", "value");
    std::printf("%-22s %12.6f\n", "task_gain (w.a_t)", report.filter.task_gain);
    std::printf("%-22s %12.6f\n", "max_leak (w.A_n)", report.filter.max_leak);
    std::printf("%-22s %12.6f\n", "cosine(w, a_t)", report.cosine_w);
    std::printf("%-22s %12.6f\n", "cosine(a_hat, a_t)", report.cosine_a_hat);

    if (!csv_path.empty()) {
        std::ofstream f(csv_path, std::ios::trunc);
        if (!f) throw FormatError("cannot write " + csv_path);
        f.precision(17);
        f << "i,w,a_hat,a_t\n";
        for (std::size_t i = 0; i < dim; ++i)
            f << i << "," << report.w[i] << "," << report.a_hat[i] << "," << spec.a_t[i]
              << "\n";
        std::cout << "wrote " << csv_path << "\n";
    }
    return 0;
}

// ------------------------------------------------------------- selftest ----

struct SelfTest {
    int failures = 0;
    void check(const std::string& name, bool ok) {
        std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
        if (!ok) ++failures;
    }
};

Mlp random_net(std::mt19937_64& rng, std::size_t in, std::size_t hid, std::size_t out) {
    return make_mlp(in, {hid}, out, rng());
}

int cmd_selftest() {
    SelfTest st;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);

    {  // forward/trace consistency + determinism
        bool ok = true;
        for (int t = 0; t < 10; ++t) {
            Mlp net = random_net(rng, 6, 5, 3);
            Vector x(6);
            for (auto& v : x) v = gauss(rng);
            const auto tr = forward_trace(net, x);
            ok = ok && forward(net, x) == tr.layers.back().pre_activation;
            ok = ok && forward_trace(net, x).layers.back().activation ==
                           tr.layers.back().activation;
        }
        st.check("forward/trace consistency", ok);
    }
    {  // finite-difference gradient
        bool ok = true;
        const double h = 1e-5;
        for (int t = 0; t < 10; ++t) {
            Mlp net = random_net(rng, 5, 8, 2);
            Vector x(5);
            for (auto& v : x) v = gauss(rng);
            const auto tr = forward_trace(net, x);
            bool near_kink = false;
            for (double z : tr.layers.front().pre_activation)
                if (std::abs(z) < 1e-3) near_kink = true;
            if (near_kink) continue;
            const Vector g = input_gradient(net, tr, 0);
            for (std::size_t i = 0; i < x.size(); ++i) {
                Vector xp = x, xm = x;
                xp[i] += h;
                xm[i] -= h;
                const double fd = (forward(net, xp)[0] - forward(net, xm)[0]) / (2 * h);
                if (std::abs(fd - g[i]) > 1e-6) ok = false;
            }
        }
        st.check("input gradient matches central differences", ok);
    }
    {  // bias-as-input equivalence
        bool ok = true;
        for (int t = 0; t < 100; ++t) {
            DenseLayer layer;
            const std::size_t in = 1 + std::size_t(rng() % 6);
            const std::size_t out = 1 + std::size_t(rng() % 6);
            layer.weights = Matrix(out, in);
            layer.bias.assign(out, 0.0);
            for (auto& w : layer.weights.data()) w = gauss(rng);
            for (auto& b : layer.bias) b = gauss(rng);
            Vector x(in), x_aug;
            for (auto& v : x) v = gauss(rng);
            x_aug = x;
            x_aug.push_back(1.0);
            const Matrix aug = augment_bias_as_input(layer);
            for (std::size_t j = 0; j < out; ++j) {
                // same summation order as the augmented product: weights, then bias
                double z_explicit = 0.0;
                for (std::size_t i = 0; i < in; ++i)
                    z_explicit += layer.weights(j, i) * x[i];
                z_explicit += layer.bias[j];
                double z_aug = 0.0;
                for (std::size_t i = 0; i < in + 1; ++i) z_aug += aug(j, i) * x_aug[i];
                if (z_explicit != z_aug) ok = false;
            }
        }
        st.check("bias-as-input equivalence (exact)", ok);
    }
    {  // root condition
        bool ok = true;
        for (int t = 0; t < 200; ++t) {
            Vector w(6), x(6), v(6);
            for (auto& a : w) a = gauss(rng);
            for (auto& a : x) a = gauss(rng);
            for (auto& a : v) a = gauss(rng);
            if (std::abs(dot(w, v)) < 1e-6) continue;
            const auto rp = root_point(x, w, v);
            const double bound =
                1e-9 * std::sqrt(dot(w, w)) * std::sqrt(dot(x, x)) + 1e-300;
            if (std::abs(dot(w, rp.x_tilde)) > bound) ok = false;
        }
        st.check("root condition |w.x~| ~ 0", ok);
    }
    Dataset toy = make_digit_dataset(400, 11);
    Mlp toy_net = make_mlp(784, {32}, 10, 12);
    {
        TrainConfig tc;
        tc.epochs = 30;
        tc.learning_rate = 0.1;
        tc.seed = 13;
        train(toy_net, toy, tc);
        st.check("toy training reaches 90% train accuracy", accuracy(toy_net, toy) >= 0.9);
    }
    PatternSet toy_patterns = estimate_patterns(toy_net, toy);
    {  // conservation across all deep Taylor rules
        bool ok = true;
        for (Rule rule : {Rule::Z, Rule::W2, Rule::WPlus, Rule::A, Rule::APlus}) {
            for (std::size_t i = 0; i < 20; ++i) {
                const auto rep = explain(toy_net, sample_of(toy, i), toy.labels[i], rule,
                                         &toy_patterns, 0.0);
                if (rep.conservation_residual > 1e-9) ok = false;
            }
        }
        st.check("conservation residual <= 1e-9, all deep Taylor rules", ok);
    }
    {  // z-rule == gradient * input
        bool ok = true;
        for (std::size_t i = 0; i < 20; ++i) {
            const Vector x = sample_of(toy, i);
            const auto z = explain(toy_net, x, toy.labels[i], Rule::Z);
            const auto gi = explain(toy_net, x, toy.labels[i], Rule::GradTimesInput);
            double scale = 0.0;
            for (double v : gi.input_relevance()) scale = std::max(scale, std::abs(v));
            for (std::size_t p = 0; p < x.size(); ++p)
                if (std::abs(z.input_relevance()[p] - gi.input_relevance()[p]) >
                    1e-8 * std::max(scale, 1e-12))
                    ok = false;
        }
        st.check("z-rule equals gradient x input (1e-8 relative)", ok);
    }
    {  // streaming pattern estimate vs dense closed form
        bool ok = true;
        for (int t = 0; t < 20; ++t) {
            const std::size_t d = 2 + rng() % 4, n = d + 2 + rng() % 10;
            Mlp lin;
            lin.input_dim = d;
            DenseLayer layer;
            layer.weights = Matrix(1, d);
            layer.bias = {0.0};
            for (auto& w : layer.weights.data()) w = gauss(rng);
            lin.layers.push_back(layer);
            Dataset data;
            data.images = Matrix(n, d);
            data.labels.assign(n, 0);
            for (auto& v : data.images.data()) v = gauss(rng);
            const PatternSet ps = estimate_patterns(lin, data);
            // dense oracle over the unaugmented coordinates
            Vector cross(d, 0.0);
            double zsq = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                double z = 0.0;
                for (std::size_t i = 0; i < d; ++i)
                    z += layer.weights(0, i) * data.images(s, i);
                for (std::size_t i = 0; i < d; ++i) cross[i] += data.images(s, i) * z;
                zsq += z * z;
            }
            for (std::size_t i = 0; i < d; ++i)
                if (std::abs(ps.layers[0](i, 0) - cross[i] / zsq) > 1e-10) ok = false;
        }
        st.check("streaming patterns match dense regression (1e-10)", ok);
    }
    {  // accumulator merge
        auto accA = MomentAccumulator::for_model(toy_net);
        auto accB = MomentAccumulator::for_model(toy_net);
        auto accAll = MomentAccumulator::for_model(toy_net);
        for (std::size_t i = 0; i < 10; ++i) {
            const auto tr = forward_trace(toy_net, sample_of(toy, i));
            accumulate(i < 5 ? accA : accB, tr);
            accumulate(accAll, tr);
        }
        const auto merged = merge(accA, accB);
        bool ok = merged.count == accAll.count;
        for (std::size_t l = 0; ok && l < merged.cross.size(); ++l)
            for (std::size_t i = 0; i < merged.cross[l].data().size(); ++i)
                if (std::abs(merged.cross[l].data()[i] - accAll.cross[l].data()[i]) >
                    1e-12 * (1.0 + std::abs(accAll.cross[l].data()[i])))
                    ok = false;
        st.check("accumulator merge equals joint accumulation", ok);
    }
    {  // generative lab, desk scale
        const GenerativeSpec spec = make_lab_spec(10, 3, 0.1, 21);
        const auto rep = pattern_vs_filter_demo(spec, 20000);
        st.check("lab filter: |w.a_t - 1| <= 0.05",
                 std::abs(rep.filter.task_gain - 1.0) <= 0.05);
        st.check("lab filter: max leak <= 0.05", rep.filter.max_leak <= 0.05);
        st.check("lab pattern: cosine(a_hat, a_t) >= 0.99", rep.cosine_a_hat >= 0.99);
    }
    {  // IDX fixture round trip and guards
        const auto dir = fs::temp_directory_path() / "dtd_selftest";
        fs::create_directories(dir);
        const auto img_path = (dir / "img.idx").string();
        const auto lab_path = (dir / "lab.idx").string();
        write_idx_images(img_path, {0, 255, 128, 64, 255, 0, 0, 0}, 2, 2, 2);
        write_idx_labels(lab_path, {5, 0});
        const Matrix m = load_idx_images(img_path);
        bool ok = m.rows() == 2 && m(0, 1) == 255 && m(1, 0) == 255 && m(0, 3) == 64;
        const auto labs = load_idx_labels(lab_path);
        ok = ok && labs.size() == 2 && labs[0] == 5;
        bool threw = false;
        try {
            load_idx_images(lab_path);  // wrong magic
        } catch (const FormatError&) {
            threw = true;
        }
        st.check("IDX round trip and wrong-magic guard", ok && threw);

        const auto model_file = (dir / "m.dtdn").string();
        save_model(toy_net, model_file);
        const Mlp back = load_model(model_file);
        st.check("model persistence round trip", model_hash(back) == model_hash(toy_net));
        const auto pat_file = (dir / "p.dtdp").string();
        save_patterns(toy_patterns, pat_file);
        const PatternSet pback = load_patterns(pat_file);
        st.check("pattern persistence round trip",
                 pback.layers == toy_patterns.layers &&
                     pback.fingerprint == toy_patterns.fingerprint);
        // corrupt the model file header
        {
            std::fstream f(model_file,
                           std::ios::in | std::ios::out | std::ios::binary);
            f.seekp(0);
            f.write("XXXX", 4);
        }
        bool corrupt_caught = false;
        try {
            load_model(model_file);
        } catch (const FormatError&) {
            corrupt_caught = true;
        }
        st.check("corrupted model file rejected", corrupt_caught);
    }
    {  // heatmap mirror symmetry
        Matrix rel(2, 2);
        rel.data() = {0.5, -1.0, 0.25, 0.0};
        Matrix neg = rel;
        for (auto& v : neg.data()) v = -v;
        const auto a = render_heatmap(rel, {1});
        const auto b = render_heatmap(neg, {1});
        bool ok = true;
        for (std::size_t i = 0; i < a.pixels.size(); ++i)
            if (a.pixels[i].r != b.pixels[i].b || a.pixels[i].g != b.pixels[i].g ||
                a.pixels[i].b != b.pixels[i].r)
                ok = false;
        st.check("heatmap negation mirrors colors", ok);
    }

    std::cout << (st.failures == 0 ? "selftest: all checks passed\n"
                                   : "selftest: FAILURES present\n");
    return st.failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep Taylor decomposition attribution toolkit"};
    app.require_subcommand(1);

    ExperimentConfig cfg;
    // --config is applied before the remaining flags so they can override it
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                apply_toml(cfg, argv[i + 1]);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 2;
            }
        }
    }

    std::string config_path;
    app.add_option("--config", config_path, "TOML config file");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "TOML config file");
        sub->add_option("--mnist-images", cfg.train_images, "training images (IDX)");
        sub->add_option("--mnist-labels", cfg.train_labels, "training labels (IDX)");
        sub->add_option("--test-images", cfg.test_images, "evaluation images (IDX)");
        sub->add_option("--test-labels", cfg.test_labels, "evaluation labels (IDX)");
        sub->add_option("--out", cfg.out, "output directory");
        sub->add_option("--seed", cfg.master_seed, "master seed");
        sub->add_option("--stabilizer", cfg.stabilizer, "denominator stabilizer epsilon");
        sub->add_option("--noise-levels", cfg.noise_levels, "noise sweep sigmas");
        sub->add_option("--rules", cfg.rules, "explanation rules");
        sub->add_flag_callback("--train-on-clean",
                               [&cfg] { cfg.train_on_noisy = false; },
                               "train one clean-data model instead of per-noise-level");
        sub->add_option("--epochs", cfg.epochs, "SGD epochs");
        sub->add_option("--batch", cfg.batch_size, "batch size");
        sub->add_option("--lr", cfg.learning_rate, "learning rate");
        sub->add_option("--hidden", cfg.hidden, "hidden layer width");
        sub->add_option("--upscale", cfg.upscale, "heatmap upscale factor");
    };

    auto* sub_train = app.add_subcommand("train", "train one model per noise level");
    add_common(sub_train);

    auto* sub_patterns =
        app.add_subcommand("patterns", "estimate a-rule patterns per noise level");
    add_common(sub_patterns);

    double sigma = 0.0;
    std::size_t index = 0;
    long target = -1;
    std::string rule = "z", model_file, patterns_file;
    auto* sub_explain = app.add_subcommand("explain", "explain one sample");
    add_common(sub_explain);
    sub_explain->add_option("--sigma", sigma, "noise level");
    sub_explain->add_option("--index", index, "sample index");
    sub_explain->add_option("--target", target, "output neuron (default: true label)");
    sub_explain->add_option("--rule", rule, "explanation rule");
    sub_explain->add_option("--model", model_file, "model file (default: per-sigma)");
    sub_explain->add_option("--patterns", patterns_file, "pattern file (default: per-sigma)");

    std::string grid_mode = "fig1";
    long grid_index = -1, grid_target = -1;
    auto* sub_grid = app.add_subcommand("grid", "render a figure grid");
    add_common(sub_grid);
    sub_grid->add_option("--mode", grid_mode, "fig1 (rules x noise) or fig2 (digits x rules)");
    sub_grid->add_option("--index", grid_index, "sample index for fig1 (default: first 4)");
    sub_grid->add_option("--target", grid_target, "output neuron (default: true label)");

    std::size_t lab_dim = 20, lab_k = 5, lab_n = 50000;
    double lab_sigma = 0.1, lab_ridge = 0.0;
    std::uint64_t lab_seed = 1;
    std::string lab_csv;
    auto* sub_synth = app.add_subcommand("synth", "pattern-vs-filter synthetic lab");
    sub_synth->add_option("--dim", lab_dim, "data dimensionality D");
    sub_synth->add_option("--distractors", lab_k, "distractor count K");
    sub_synth->add_option("--sigma", lab_sigma, "isotropic noise scale");
    sub_synth->add_option("--n", lab_n, "sample count");
    sub_synth->add_option("--seed", lab_seed, "lab seed");
    sub_synth->add_option("--ridge", lab_ridge, "ridge for the normal equations");
    sub_synth->add_option("--csv", lab_csv, "optional CSV output path");

    app.add_subcommand("selftest", "run the built-in invariant checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sub_train->parsed()) return cmd_train(cfg);
        if (sub_patterns->parsed()) return cmd_patterns(cfg);
        if (sub_explain->parsed())
            return cmd_explain(cfg, sigma, index, target, rule, model_file, patterns_file);
        if (sub_grid->parsed()) return cmd_grid(cfg, grid_mode, grid_index, grid_target);
        if (sub_synth->parsed())
            return cmd_synth(lab_dim, lab_k, lab_sigma, lab_n, lab_seed, lab_ridge, lab_csv);
        return cmd_selftest();
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
