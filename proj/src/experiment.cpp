#include "evo/experiment.hpp"

#include "evo/plot.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace evo {

std::string to_string(Method method) {
    switch (method) {
        case Method::EvoSearch: return "evosearch";
        case Method::BestOfN: return "best_of_n";
        case Method::ParticleSampling: return "particle_sampling";
    }
    return "unknown";
}

Method parse_method(const std::string& name) {
    if (name == "evosearch") return Method::EvoSearch;
    if (name == "best_of_n") return Method::BestOfN;
    if (name == "particle_sampling") return Method::ParticleSampling;
    throw ConfigError("unknown method '" + name + "' (expected evosearch, best_of_n or particle_sampling)");
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.evosearch.schedule.times = {50, 40, 30, 20, 10};
    cfg.evosearch.populations.sizes = {128, 64, 64, 64, 64, 64};
    cfg.nfe_budget = 20000;
    return cfg;
}

namespace {

// ---------------------------------------------------------------------------
// YAML reading with located errors.

class Reader {
public:
    explicit Reader(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& problem) const {
        throw ConfigError(where(node) + ": " + field + ": " + problem);
    }

    std::string where(const YAML::Node& node) const {
        const auto mark = node.Mark();
        if (mark.line < 0) return source_;
        return source_ + ":" + std::to_string(mark.line + 1) + ":" + std::to_string(mark.column + 1);
    }

    void require_map(const YAML::Node& node, const std::string& field) const {
        if (!node.IsMap()) fail(node, field, "expected a mapping");
    }

    void check_keys(const YAML::Node& node, const std::string& field, std::initializer_list<const char*> allowed) const {
        require_map(node, field);
        for (const auto& kv : node) {
            const auto key = kv.first.as<std::string>();
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
                std::string list;
                for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
                fail(kv.first, join(field, key), "unknown key (expected one of: " + list + ")");
            }
        }
    }

    template <class T>
    T scalar(const YAML::Node& node, const std::string& field, const char* expected) const {
        if (!node.IsScalar()) fail(node, field, std::string("expected ") + expected);
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            fail(node, field, std::string("expected ") + expected + ", got '" + node.Scalar() + "'");
        }
    }

    double real(const YAML::Node& node, const std::string& field) const {
        return scalar<double>(node, field, "a number");
    }
    std::uint64_t count(const YAML::Node& node, const std::string& field) const {
        if (node.IsScalar() && !node.Scalar().empty() && node.Scalar()[0] == '-') {
            fail(node, field, "expected a non-negative integer, got '" + node.Scalar() + "'");
        }
        return scalar<std::uint64_t>(node, field, "a non-negative integer");
    }
    bool flag(const YAML::Node& node, const std::string& field) const {
        return scalar<bool>(node, field, "true or false");
    }
    std::string text(const YAML::Node& node, const std::string& field) const {
        return scalar<std::string>(node, field, "a string");
    }

    std::vector<double> reals(const YAML::Node& node, const std::string& field) const {
        if (!node.IsSequence()) fail(node, field, "expected a list of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < node.size(); ++i) out.push_back(real(node[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }
    std::vector<std::uint64_t> counts(const YAML::Node& node, const std::string& field) const {
        if (!node.IsSequence()) fail(node, field, "expected a list of integers");
        std::vector<std::uint64_t> out;
        for (std::size_t i = 0; i < node.size(); ++i) out.push_back(count(node[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }

    // Runs `body`; module errors already name their field and are re-raised
    // at `node`'s location. Other messages get `field` prepended.
    template <class F>
    void located(const YAML::Node& node, const std::string& field, F&& body) const {
        try {
            body();
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            const auto colon = msg.find(": ");
            const bool named = colon != std::string::npos && msg.find(' ') > colon;
            throw ConfigError(where(node) + ": " + (named ? msg : field + ": " + msg));
        } catch (const std::invalid_argument& e) {
            fail(node, field, e.what());
        }
    }

    static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

private:
    std::string source_;
};

void parse_model(const Reader& rd, const YAML::Node& node, ModelSpec& spec) {
    rd.check_keys(node, "model", {"kind", "ring", "weights", "means", "variances"});
    if (node["kind"]) {
        const auto kind = rd.text(node["kind"], "model.kind");
        if (kind == "diffusion") spec.kind = ModelKind::DiffusionEpsilon;
        else if (kind == "flow") spec.kind = ModelKind::FlowVelocity;
        else rd.fail(node["kind"], "model.kind", "expected 'diffusion' or 'flow', got '" + kind + "'");
    }
    const bool explicit_arrays = node["weights"] || node["means"] || node["variances"];
    if (node["ring"] && explicit_arrays) rd.fail(node, "model", "give either 'ring' or explicit weights/means/variances");
    if (const auto ring = node["ring"]) {
        rd.check_keys(ring, "model.ring", {"count", "radius", "variance"});
        std::uint64_t count = 8;
        double radius = 1.0, variance = 0.04;
        if (ring["count"]) count = rd.count(ring["count"], "model.ring.count");
        if (ring["radius"]) radius = rd.real(ring["radius"], "model.ring.radius");
        if (ring["variance"]) variance = rd.real(ring["variance"], "model.ring.variance");
        rd.located(ring, "model.ring", [&] { spec.mixture = GaussianMixture::ring(count, radius, variance); });
    } else if (explicit_arrays) {
        for (const char* key : {"weights", "means", "variances"}) {
            if (!node[key]) rd.fail(node, "model", std::string("missing '") + key + "'");
        }
        const auto weights = rd.reals(node["weights"], "model.weights");
        const auto variances = rd.reals(node["variances"], "model.variances");
        const auto means_node = node["means"];
        if (!means_node.IsSequence() || means_node.size() == 0) rd.fail(means_node, "model.means", "expected a list of points");
        std::vector<std::vector<double>> means;
        std::size_t dim = 0;
        for (std::size_t i = 0; i < means_node.size(); ++i) {
            const std::string field = "model.means[" + std::to_string(i) + "]";
            const auto point = rd.reals(means_node[i], field);
            if (i == 0) dim = point.size();
            if (point.size() != dim || dim == 0) rd.fail(means_node[i], field, "every mean needs the same, non-zero dimension");
            means.push_back(point);
        }
        rd.located(node, "model", [&] { spec.mixture = GaussianMixture(dim, weights, means, variances); });
    }
}

void parse_schedule(const Reader& rd, const YAML::Node& node, ModelSpec& spec) {
    rd.check_keys(node, "schedule", {"num_steps", "beta_min", "beta_max", "eta", "flow_sigma_scale"});
    if (node["num_steps"]) spec.num_steps = static_cast<int>(rd.count(node["num_steps"], "schedule.num_steps"));
    if (node["beta_min"]) spec.beta_min = rd.real(node["beta_min"], "schedule.beta_min");
    if (node["beta_max"]) spec.beta_max = rd.real(node["beta_max"], "schedule.beta_max");
    if (node["eta"]) spec.eta = rd.real(node["eta"], "schedule.eta");
    if (node["flow_sigma_scale"]) spec.flow_sigma_scale = rd.real(node["flow_sigma_scale"], "schedule.flow_sigma_scale");
    rd.located(node, "schedule", [&] { (void)make_denoiser(spec); });
}

RewardFn parse_reward(const Reader& rd, const YAML::Node& node, const ModelSpec& model) {
    rd.check_keys(node, "reward", {"kind", "radius", "center", "width", "expression"});
    const std::string kind = node["kind"] ? rd.text(node["kind"], "reward.kind") : "circle";
    auto refuse = [&](std::initializer_list<const char*> keys) {
        for (const char* k : keys) {
            if (node[k]) rd.fail(node[k], std::string("reward.") + k, "not used by reward kind '" + kind + "'");
        }
    };
    if (kind == "circle") {
        refuse({"center", "width", "expression"});
        const double radius = node["radius"] ? rd.real(node["radius"], "reward.radius") : 2.0;
        if (!(radius >= 0.0)) rd.fail(node["radius"], "reward.radius", "must be >= 0");
        return RewardFn::circle(radius);
    }
    if (kind == "radial_band") {
        refuse({"expression"});
        RadialBandReward band;
        band.center = node["center"] ? rd.reals(node["center"], "reward.center") : std::vector<double>(model.mixture.dim(), 0.0);
        if (band.center.size() != model.mixture.dim()) rd.fail(node["center"], "reward.center", "dimension differs from the model");
        if (node["radius"]) band.radius = rd.real(node["radius"], "reward.radius");
        if (node["width"]) band.width = rd.real(node["width"], "reward.width");
        if (!(band.width >= 0.0)) rd.fail(node["width"], "reward.width", "must be >= 0");
        return RewardFn(band);
    }
    if (kind == "mixture_log_density") {
        refuse({"radius", "center", "width", "expression"});
        return RewardFn(MixtureLogDensityReward{model.mixture});
    }
    if (kind == "expression") {
        refuse({"radius", "center", "width"});
        if (!node["expression"]) rd.fail(node, "reward.expression", "required for reward kind 'expression'");
        const auto source = rd.text(node["expression"], "reward.expression");
        std::optional<RewardFn> fn;
        rd.located(node["expression"], "reward.expression", [&] {
            auto expr = Expression::parse(source);
            if (expr.max_variable() >= static_cast<int>(model.mixture.dim())) {
                throw ConfigError("uses coordinate x" + std::to_string(expr.max_variable()) + " but the model is " +
                                  std::to_string(model.mixture.dim()) + "-dimensional");
            }
            fn.emplace(ExpressionReward{std::move(expr)});
        });
        return *fn;
    }
    rd.fail(node["kind"], "reward.kind",
            "expected circle, radial_band, mixture_log_density or expression, got '" + kind + "'");
}

void parse_evosearch(const Reader& rd, const YAML::Node& node, ExperimentConfig& cfg) {
    rd.check_keys(node, "evosearch",
                  {"beta", "elites", "tournament_size", "schedule", "generations", "populations", "scale_to_budget", "final_k"});
    auto& evo = cfg.evosearch;
    if (node["beta"]) {
        evo.beta = rd.real(node["beta"], "evosearch.beta");
        if (!(evo.beta >= 0.0 && evo.beta <= 1.0)) rd.fail(node["beta"], "evosearch.beta", "must lie in [0, 1]");
    }
    if (node["elites"]) evo.elites = rd.count(node["elites"], "evosearch.elites");
    if (node["tournament_size"]) {
        evo.tournament_size = rd.count(node["tournament_size"], "evosearch.tournament_size");
        if (evo.tournament_size < 1) rd.fail(node["tournament_size"], "evosearch.tournament_size", "must be >= 1");
    }
    if (node["final_k"]) {
        evo.final_k = rd.count(node["final_k"], "evosearch.final_k");
        if (evo.final_k < 1) rd.fail(node["final_k"], "evosearch.final_k", "must be >= 1");
    }
    if (node["scale_to_budget"]) cfg.scale_to_budget = rd.flag(node["scale_to_budget"], "evosearch.scale_to_budget");
    if (node["schedule"] && node["generations"]) rd.fail(node, "evosearch", "give either 'schedule' or 'generations'");
    if (node["schedule"]) {
        evo.schedule.times.clear();
        for (auto t : rd.counts(node["schedule"], "evosearch.schedule")) evo.schedule.times.push_back(static_cast<int>(t));
    }
    if (node["generations"]) {
        const auto g = static_cast<int>(rd.count(node["generations"], "evosearch.generations"));
        rd.located(node["generations"], "evosearch.generations",
                   [&] { evo.schedule = make_uniform_evolution_schedule(cfg.model.num_steps, g); });
    }
    if (node["populations"]) {
        evo.populations.sizes.clear();
        for (auto k : rd.counts(node["populations"], "evosearch.populations")) evo.populations.sizes.push_back(k);
    } else if (node["schedule"] || node["generations"]) {
        evo.populations = make_population_schedule(64, evo.schedule.times.size());
    }
}

void parse_particle_sampling(const Reader& rd, const YAML::Node& node, ExperimentConfig& cfg) {
    rd.check_keys(node, "particle_sampling", {"num_particles", "resample_interval", "lambda", "resampling", "final_k"});
    auto& ps = cfg.particle_sampling;
    if (node["num_particles"]) {
        ps.num_particles = rd.count(node["num_particles"], "particle_sampling.num_particles");
        cfg.particles_from_budget = false;
    }
    if (node["resample_interval"]) {
        ps.resample_interval = static_cast<int>(rd.count(node["resample_interval"], "particle_sampling.resample_interval"));
    }
    if (node["lambda"]) ps.lambda = rd.real(node["lambda"], "particle_sampling.lambda");
    if (node["final_k"]) ps.final_k = rd.count(node["final_k"], "particle_sampling.final_k");
    if (node["resampling"]) {
        const auto mode = rd.text(node["resampling"], "particle_sampling.resampling");
        if (mode == "systematic") ps.resampling = ResamplingMode::Systematic;
        else if (mode == "multinomial") ps.resampling = ResamplingMode::Multinomial;
        else rd.fail(node["resampling"], "particle_sampling.resampling", "expected systematic or multinomial, got '" + mode + "'");
    }
    rd.located(node, "particle_sampling", [&] { ps.validate(); });
}

void parse_metrics(const Reader& rd, const YAML::Node& node, CoverageSpec& spec) {
    rd.check_keys(node, "metrics", {"radius", "center", "band_width", "angular_bins", "mode_radius"});
    if (node["radius"]) spec.radius = rd.real(node["radius"], "metrics.radius");
    if (node["center"]) spec.center = rd.reals(node["center"], "metrics.center");
    if (node["band_width"]) spec.band_width = rd.real(node["band_width"], "metrics.band_width");
    if (node["angular_bins"]) spec.num_angular_bins = rd.count(node["angular_bins"], "metrics.angular_bins");
    if (node["mode_radius"]) spec.mode_radius = rd.real(node["mode_radius"], "metrics.mode_radius");
    rd.located(node, "metrics", [&] { spec.validate(); });
}

std::vector<std::uint64_t> parse_seeds(const Reader& rd, const YAML::Node& node) {
    if (node.IsSequence()) {
        auto seeds = rd.counts(node, "seeds");
        if (seeds.empty()) rd.fail(node, "seeds", "need at least one seed");
        return seeds;
    }
    rd.check_keys(node, "seeds", {"first", "count"});
    const std::uint64_t first = node["first"] ? rd.count(node["first"], "seeds.first") : 0;
    if (!node["count"]) rd.fail(node, "seeds.count", "required");
    const std::uint64_t count = rd.count(node["count"], "seeds.count");
    if (count == 0) rd.fail(node["count"], "seeds.count", "must be >= 1");
    std::vector<std::uint64_t> seeds(count);
    std::iota(seeds.begin(), seeds.end(), first);
    return seeds;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                          ": syntax error: " + e.msg);
    }
    const Reader rd(source);
    ExperimentConfig cfg = default_experiment_config();
    if (root.IsNull()) return cfg;
    rd.check_keys(root, "",
                  {"model", "schedule", "reward", "target", "method", "methods", "nfe_budget", "evosearch", "best_of_n",
                   "particle_sampling", "metrics", "seeds", "output_dir", "execution", "sweep"});

    if (root["model"]) parse_model(rd, root["model"], cfg.model);
    if (root["schedule"]) parse_schedule(rd, root["schedule"], cfg.model);
    cfg.evosearch.schedule = make_uniform_evolution_schedule(cfg.model.num_steps, 5);
    if (root["reward"]) cfg.reward = parse_reward(rd, root["reward"], cfg.model);
    else if (cfg.model.mixture.dim() != 2) rd.fail(root, "reward", "required when the model is not 2-dimensional");
    if (const auto target = root["target"]) {
        rd.check_keys(target, "target", {"alpha"});
        if (target["alpha"]) cfg.target_alpha = rd.real(target["alpha"], "target.alpha");
        if (!(cfg.target_alpha > 0.0)) rd.fail(target["alpha"], "target.alpha", "must be > 0");
    }

    if (root["method"] && root["methods"]) rd.fail(root, "method", "give either 'method' or 'methods'");
    auto method_at = [&](const YAML::Node& n, const std::string& field) {
        const auto name = rd.text(n, field);
        Method m{};
        rd.located(n, field, [&] { m = parse_method(name); });
        return m;
    };
    if (root["method"]) cfg.methods = {method_at(root["method"], "method")};
    if (const auto list = root["methods"]) {
        if (!list.IsSequence() || list.size() == 0) rd.fail(list, "methods", "expected a non-empty list");
        cfg.methods.clear();
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto m = method_at(list[i], "methods[" + std::to_string(i) + "]");
            if (std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end()) {
                rd.fail(list[i], "methods[" + std::to_string(i) + "]", "listed twice");
            }
            cfg.methods.push_back(m);
        }
    }

    if (root["nfe_budget"]) {
        if (root["nfe_budget"].IsNull()) cfg.nfe_budget.reset();
        else cfg.nfe_budget = rd.count(root["nfe_budget"], "nfe_budget");
        if (cfg.nfe_budget && *cfg.nfe_budget == 0) rd.fail(root["nfe_budget"], "nfe_budget", "must be >= 1");
    }
    if (root["evosearch"]) parse_evosearch(rd, root["evosearch"], cfg);
    if (const auto bon = root["best_of_n"]) {
        rd.check_keys(bon, "best_of_n", {"n", "final_k"});
        if (bon["n"]) {
            cfg.best_of_n = rd.count(bon["n"], "best_of_n.n");
            if (*cfg.best_of_n == 0) rd.fail(bon["n"], "best_of_n.n", "must be >= 1");
        }
        if (bon["final_k"]) cfg.best_of_n_final_k = rd.count(bon["final_k"], "best_of_n.final_k");
        if (cfg.best_of_n_final_k == 0) rd.fail(bon["final_k"], "best_of_n.final_k", "must be >= 1");
    }
    if (root["particle_sampling"]) parse_particle_sampling(rd, root["particle_sampling"], cfg);
    if (root["metrics"]) parse_metrics(rd, root["metrics"], cfg.coverage);
    if (root["seeds"]) cfg.seeds = parse_seeds(rd, root["seeds"]);
    if (root["output_dir"]) cfg.output_dir = rd.text(root["output_dir"], "output_dir");
    if (const auto exec = root["execution"]) {
        rd.check_keys(exec, "execution", {"parallel"});
        if (exec["parallel"]) {
            cfg.policy = rd.flag(exec["parallel"], "execution.parallel") ? ExecPolicy::Parallel : ExecPolicy::Serial;
        }
    }
    if (const auto sweep = root["sweep"]) {
        rd.check_keys(sweep, "sweep", {"budgets"});
        if (sweep["budgets"]) {
            cfg.sweep_budgets = rd.counts(sweep["budgets"], "sweep.budgets");
            for (std::size_t i = 0; i < cfg.sweep_budgets.size(); ++i) {
                if (cfg.sweep_budgets[i] == 0 || (i > 0 && cfg.sweep_budgets[i] <= cfg.sweep_budgets[i - 1])) {
                    rd.fail(sweep["budgets"][i], "sweep.budgets[" + std::to_string(i) + "]",
                            "budgets must be positive and strictly ascending");
                }
            }
        }
    }

    // Everything the run needs must resolve now, so errors point at the file.
    YAML::Node anchor = root["nfe_budget"] ? root["nfe_budget"] : root;
    if (const auto evo = root["evosearch"]) anchor = evo["populations"] ? evo["populations"] : evo;
    rd.located(anchor, "evosearch", [&] { (void)resolve_methods(cfg, cfg.nfe_budget); });
    for (auto b : cfg.sweep_budgets) {
        rd.located(root["sweep"]["budgets"], "sweep.budgets", [&] { (void)resolve_methods(cfg, b); });
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_experiment_config(text.str(), path.string());
}

namespace {

YAML::Node reward_node(const RewardFn& fn) {
    YAML::Node n;
    std::visit(
        [&](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, CircleReward>) {
                n["kind"] = "circle";
                n["radius"] = r.radius;
            } else if constexpr (std::is_same_v<T, RadialBandReward>) {
                n["kind"] = "radial_band";
                n["center"] = r.center;
                n["radius"] = r.radius;
                n["width"] = r.width;
            } else if constexpr (std::is_same_v<T, MixtureLogDensityReward>) {
                n["kind"] = "mixture_log_density";
            } else {
                n["kind"] = "expression";
                n["expression"] = r.expression.source();
            }
        },
        fn.kind());
    return n;
}

}  // namespace

std::string dump_experiment_config(const ExperimentConfig& cfg) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out.SetSeqFormat(YAML::Flow);
    YAML::Node root;
    YAML::Node model;
    model["kind"] = cfg.model.kind == ModelKind::DiffusionEpsilon ? "diffusion" : "flow";
    model["weights"] = cfg.model.mixture.weights();
    for (std::size_t i = 0; i < cfg.model.mixture.components(); ++i) {
        const auto mu = cfg.model.mixture.mean(i);
        model["means"].push_back(std::vector<double>(mu.begin(), mu.end()));
    }
    model["variances"] = cfg.model.mixture.variances();
    root["model"] = model;
    root["schedule"]["num_steps"] = cfg.model.num_steps;
    root["schedule"]["beta_min"] = cfg.model.beta_min;
    root["schedule"]["beta_max"] = cfg.model.beta_max;
    root["schedule"]["eta"] = cfg.model.eta;
    root["schedule"]["flow_sigma_scale"] = cfg.model.flow_sigma_scale;
    root["reward"] = reward_node(cfg.reward);
    root["target"]["alpha"] = cfg.target_alpha;
    for (auto m : cfg.methods) root["methods"].push_back(to_string(m));
    if (cfg.nfe_budget) root["nfe_budget"] = *cfg.nfe_budget;
    auto evo = root["evosearch"];
    evo["beta"] = cfg.evosearch.beta;
    evo["elites"] = cfg.evosearch.elites;
    evo["tournament_size"] = cfg.evosearch.tournament_size;
    evo["schedule"] = cfg.evosearch.schedule.times;
    evo["populations"] = cfg.evosearch.populations.sizes;
    evo["scale_to_budget"] = cfg.scale_to_budget;
    evo["final_k"] = cfg.evosearch.final_k;
    if (cfg.best_of_n) root["best_of_n"]["n"] = *cfg.best_of_n;
    root["best_of_n"]["final_k"] = cfg.best_of_n_final_k;
    auto ps = root["particle_sampling"];
    if (!cfg.particles_from_budget) ps["num_particles"] = cfg.particle_sampling.num_particles;
    ps["resample_interval"] = cfg.particle_sampling.resample_interval;
    ps["lambda"] = cfg.particle_sampling.lambda;
    ps["resampling"] = cfg.particle_sampling.resampling == ResamplingMode::Systematic ? "systematic" : "multinomial";
    ps["final_k"] = cfg.particle_sampling.final_k;
    root["metrics"]["radius"] = cfg.coverage.radius;
    root["metrics"]["center"] = cfg.coverage.center;
    root["metrics"]["band_width"] = cfg.coverage.band_width;
    root["metrics"]["angular_bins"] = cfg.coverage.num_angular_bins;
    root["metrics"]["mode_radius"] = cfg.coverage.mode_radius;
    root["seeds"] = cfg.seeds;
    root["output_dir"] = cfg.output_dir.generic_string();
    root["execution"]["parallel"] = cfg.policy == ExecPolicy::Parallel;
    if (!cfg.sweep_budgets.empty()) root["sweep"]["budgets"] = cfg.sweep_budgets;
    out << root;
    return std::string(out.c_str()) + "\n";
}

Denoiser make_denoiser(const ModelSpec& spec, ExecPolicy policy) {
    if (spec.kind == ModelKind::DiffusionEpsilon) {
        return Denoiser(spec.mixture, make_linear_schedule(spec.num_steps, spec.beta_min, spec.beta_max, spec.eta), policy);
    }
    return Denoiser(spec.mixture, make_uniform_flow_grid(spec.num_steps, spec.flow_sigma_scale), policy);
}

namespace {

bool uses(const ExperimentConfig& cfg, Method m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

void check_budget(const std::string& field, std::uint64_t cost, std::uint64_t budget) {
    const double gap = std::abs(static_cast<double>(cost) - static_cast<double>(budget));
    if (gap > 0.05 * static_cast<double>(budget)) {
        throw ConfigError(field + ": costs " + std::to_string(cost) + " model calls, more than 5% away from the budget of " +
                          std::to_string(budget));
    }
}

}  // namespace

ResolvedMethods resolve_methods(const ExperimentConfig& cfg, std::optional<std::uint64_t> budget) {
    ResolvedMethods r;
    r.evosearch = cfg.evosearch;
    r.particle_sampling = cfg.particle_sampling;
    r.best_of_n_final_k = cfg.best_of_n_final_k;
    const auto steps = static_cast<std::uint64_t>(cfg.model.num_steps);
    if (steps == 0) throw ConfigError("schedule.num_steps: must be >= 1");
    validate_schedules(r.evosearch.schedule, r.evosearch.populations, cfg.model.num_steps);

    const std::uint64_t declared = evosearch_nfe(r.evosearch.schedule, r.evosearch.populations);
    if (budget && cfg.scale_to_budget) {
        const double f = static_cast<double>(*budget) / static_cast<double>(declared);
        for (auto& k : r.evosearch.populations.sizes) {
            k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(k) * f)));
        }
    }
    r.evosearch_nfe = evosearch_nfe(r.evosearch.schedule, r.evosearch.populations);
    r.budget = budget.value_or(r.evosearch_nfe);

    r.best_of_n = cfg.best_of_n.value_or(std::max<std::uint64_t>(1, r.budget / steps));
    if (cfg.particles_from_budget) r.particle_sampling.num_particles = std::max<std::uint64_t>(1, r.budget / steps);

    if (budget) {
        if (uses(cfg, Method::EvoSearch)) check_budget("evosearch.populations", r.evosearch_nfe, *budget);
        if (uses(cfg, Method::BestOfN)) check_budget("best_of_n.n", r.best_of_n * steps, *budget);
        if (uses(cfg, Method::ParticleSampling)) {
            check_budget("particle_sampling.num_particles", r.particle_sampling.num_particles * steps, *budget);
        }
    }
    if (uses(cfg, Method::EvoSearch)) r.evosearch.validate(cfg.model.num_steps);
    r.particle_sampling.validate();
    return r;
}

SearchResult run_method(Method method, const ResolvedMethods& resolved, const Denoiser& denoiser, const RewardFn& fn,
                        std::uint64_t seed) {
    switch (method) {
        case Method::EvoSearch: return evosearch_run(resolved.evosearch, denoiser, fn, seed);
        case Method::BestOfN: return best_of_n(resolved.best_of_n, denoiser, fn, seed, resolved.best_of_n_final_k);
        case Method::ParticleSampling: return particle_sampling(resolved.particle_sampling, denoiser, fn, seed);
    }
    throw std::invalid_argument("run_method: unknown method");
}

std::size_t final_k_for(Method method, const ResolvedMethods& resolved) {
    switch (method) {
        case Method::EvoSearch: return resolved.evosearch.final_k;
        case Method::BestOfN: return resolved.best_of_n_final_k;
        case Method::ParticleSampling: return resolved.particle_sampling.final_k;
    }
    return 1;
}

SeedSummary summarize_events(const std::string& method, std::uint64_t seed, std::uint64_t budget,
                             const std::vector<Event>& events, std::size_t final_k, const CoverageSpec& coverage,
                             const GaussianMixture& model) {
    if (events.empty()) throw RuntimeError(method + " seed " + std::to_string(seed) + ": empty event log");
    SeedSummary s;
    s.method = method;
    s.seed = seed;
    s.budget = budget;
    s.events = events.size();
    s.model_calls = events.back().cumulative_nfe;
    std::vector<double> rewards;
    const Batch top = top_samples(events, final_k, &rewards);
    s.final_best = rewards.front();
    s.top_k_mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    s.diversity = top.size() >= 2 ? diversity_l2(top) : 0.0;
    s.angular_coverage = top.dim() == 2 ? angular_coverage(top, coverage) : 0.0;
    s.mode_coverage = mode_coverage(top, model, coverage);
    return s;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeError("cannot write " + path.string());
    out << text;
    if (!out) throw RuntimeError("failed writing " + path.string());
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

constexpr const char* kSummaryHeader =
    "method,seed,budget,model_calls,events,final_best_reward,top_k_mean_reward,diversity_l2,angular_coverage,mode_coverage\n";

std::string summary_row(const SeedSummary& s) {
    return s.method + "," + std::to_string(s.seed) + "," + std::to_string(s.budget) + "," + std::to_string(s.model_calls) +
           "," + std::to_string(s.events) + "," + format_double(s.final_best) + "," + format_double(s.top_k_mean) + "," +
           format_double(s.diversity) + "," + format_double(s.angular_coverage) + "," + format_double(s.mode_coverage) +
           "\n";
}

// Mean running best over seeds on a common NFE grid.
Series mean_curve(const std::string& label, const std::vector<std::vector<Event>>& logs) {
    Series s;
    s.label = label;
    std::vector<std::vector<CurvePoint>> curves;
    std::uint64_t first = 0, last = 0;
    for (const auto& log : logs) {
        curves.push_back(reward_summary(log).curve);
        first = std::max(first, curves.back().front().nfe);
        last = std::max(last, curves.back().back().nfe);
    }
    constexpr int points = 60;
    for (int k = 0; k <= points; ++k) {
        const auto nfe = first + (last - first) * static_cast<std::uint64_t>(k) / points;
        double sum = 0.0;
        for (const auto& c : curves) sum += best_at(c, nfe);
        s.x.push_back(static_cast<double>(nfe));
        s.y.push_back(sum / static_cast<double>(curves.size()));
        if (first == last) break;
    }
    return s;
}

}  // namespace

std::vector<SeedSummary> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                        std::optional<std::uint64_t> budget, const RunOptions& options) {
    const auto resolved = resolve_methods(cfg, budget);
    const Denoiser denoiser = make_denoiser(cfg.model, cfg.policy);
    std::filesystem::create_directories(out_dir);

    // The manifest is itself a config that reproduces this run exactly.
    ExperimentConfig manifest = cfg;
    manifest.nfe_budget = resolved.budget;
    manifest.evosearch = resolved.evosearch;
    manifest.scale_to_budget = false;
    manifest.best_of_n = resolved.best_of_n;
    manifest.particle_sampling = resolved.particle_sampling;
    manifest.particles_from_budget = false;
    manifest.output_dir = out_dir;
    manifest.sweep_budgets.clear();
    write_text(out_dir / "manifest.yaml", dump_experiment_config(manifest));

    std::vector<SeedSummary> summaries;
    std::string summary_csv = kSummaryHeader;
    std::string generations_csv = "method,seed,generation,step,evaluated,mean,max,std,cumulative_nfe,pool_sizes\n";
    CurvePlot curve{"Best reward vs model calls", "model calls (NFE)", "mean best reward over seeds", false, {}};

    for (Method method : cfg.methods) {
        const std::string name = to_string(method);
        std::vector<std::vector<Event>> logs;
        Batch finals;
        for (std::uint64_t seed : cfg.seeds) {
            const auto result = run_method(method, resolved, denoiser, cfg.reward, seed);
            const auto dir = out_dir / name / seed_dir(seed);
            std::filesystem::create_directories(dir);
            write_event_log(dir / "events.csv", result.events);
            for (const auto& g : result.generation_stats) {
                std::string pools;
                for (std::size_t i = 0; i < g.pool_sizes.size(); ++i) pools += (i ? ";" : "") + std::to_string(g.pool_sizes[i]);
                generations_csv += name + "," + std::to_string(seed) + "," + std::to_string(g.generation) + "," +
                                   std::to_string(g.step) + "," + std::to_string(g.evaluated) + "," + format_double(g.mean) +
                                   "," + format_double(g.max) + "," + format_double(g.std) + "," +
                                   std::to_string(g.cumulative_nfe) + "," + pools + "\n";
            }
            auto s = summarize_events(name, seed, resolved.budget, result.events, final_k_for(method, resolved),
                                      cfg.coverage, cfg.model.mixture);
            summary_csv += summary_row(s);
            if (!options.quiet) {
                spdlog::info("{} seed {}: best reward {} ({} model calls)", name, seed, format_double(s.final_best),
                             s.model_calls);
            }
            summaries.push_back(std::move(s));
            finals.append(top_samples(result.events, final_k_for(method, resolved)));
            logs.push_back(result.events);
        }
        curve.series.push_back(mean_curve(name, logs));
        ScatterPlot scatter{name + ": top samples, all seeds"};
        write_text(out_dir / name / "scatter.svg", render_scatter(scatter, cfg.model.mixture, cfg.reward, finals));
    }
    write_text(out_dir / "summary.csv", summary_csv);
    write_text(out_dir / "generations.csv", generations_csv);
    write_text(out_dir / "curve.svg", render_curves(curve));
    return summaries;
}

std::vector<SeedSummary> sweep_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                          const std::vector<std::uint64_t>& budgets, const RunOptions& options) {
    if (budgets.empty()) throw ConfigError("sweep.budgets: need at least one budget");
    for (std::size_t i = 1; i < budgets.size(); ++i) {
        if (budgets[i] <= budgets[i - 1]) throw ConfigError("sweep.budgets: budgets must be strictly ascending");
    }
    for (auto b : budgets) (void)resolve_methods(cfg, b);

    std::vector<SeedSummary> all;
    for (auto b : budgets) {
        if (!options.quiet) spdlog::info("budget {}", b);
        auto part = run_experiment(cfg, out_dir / ("budget_" + std::to_string(b)), b, options);
        all.insert(all.end(), part.begin(), part.end());
    }

    std::string table = "method,budget,seed,final_best_reward,top_k_mean_reward,diversity_l2,angular_coverage\n";
    for (const auto& s : all) {
        table += s.method + "," + std::to_string(s.budget) + "," + std::to_string(s.seed) + "," + format_double(s.final_best) +
                 "," + format_double(s.top_k_mean) + "," + format_double(s.diversity) + "," +
                 format_double(s.angular_coverage) + "\n";
    }
    write_text(out_dir / "sweep.csv", table);

    CurvePlot plot{"Scaling with inference-time compute", "budget (model calls)", "final best reward (mean +/- std)", true, {}};
    for (Method method : cfg.methods) {
        Series series;
        series.label = to_string(method);
        for (auto b : budgets) {
            std::vector<double> v;
            for (const auto& s : all) {
                if (s.method == series.label && s.budget == b) v.push_back(s.final_best);
            }
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) var += (x - mean) * (x - mean);
            series.x.push_back(static_cast<double>(b));
            series.y.push_back(mean);
            series.err.push_back(std::sqrt(var / static_cast<double>(v.size())));
        }
        plot.series.push_back(std::move(series));
    }
    write_text(out_dir / "scaling.svg", render_curves(plot));
    return all;
}

std::vector<ComparisonRow> compare_runs(const std::vector<std::filesystem::path>& run_dirs) {
    if (run_dirs.empty()) throw ConfigError("compare: need at least one run directory");
    std::vector<ComparisonRow> rows;
    std::optional<std::string> reward_spec;
    for (const auto& dir : run_dirs) {
        const auto manifest_path = dir / "manifest.yaml";
        if (!std::filesystem::exists(manifest_path)) {
            throw RuntimeError(dir.string() + ": not a run directory (no manifest.yaml)");
        }
        const auto cfg = load_experiment_config(manifest_path);
        const auto described = cfg.reward.describe();
        if (reward_spec && *reward_spec != described) {
            throw ConfigError("compare: " + dir.string() + " uses reward " + described + " but the first run uses " +
                              *reward_spec);
        }
        reward_spec = described;
        const auto resolved = resolve_methods(cfg, cfg.nfe_budget);
        for (Method method : cfg.methods) {
            ComparisonRow row;
            row.run = dir.generic_string();
            row.method = to_string(method);
            std::vector<double> best;
            for (auto seed : cfg.seeds) {
                const auto events = read_event_log(dir / row.method / seed_dir(seed) / "events.csv");
                const auto s = summarize_events(row.method, seed, resolved.budget, events, final_k_for(method, resolved),
                                                cfg.coverage, cfg.model.mixture);
                best.push_back(s.final_best);
                row.diversity_mean += s.diversity;
                row.angular_coverage_mean += s.angular_coverage;
                row.nfe_mean += static_cast<double>(s.model_calls);
            }
            const double n = static_cast<double>(best.size());
            row.seeds = best.size();
            row.final_best_mean = std::accumulate(best.begin(), best.end(), 0.0) / n;
            double var = 0.0;
            for (double b : best) var += (b - row.final_best_mean) * (b - row.final_best_mean);
            row.final_best_std = std::sqrt(var / n);
            row.diversity_mean /= n;
            row.angular_coverage_mean /= n;
            row.nfe_mean /= n;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows) {
    std::string out =
        "| run | method | seeds | final best reward | diversity (L2) | angular coverage | NFE |\n"
        "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        out += fmt::format("| {} | {} | {} | {:.4f} ± {:.4f} | {:.4f} | {:.3f} | {:.0f} |\n", r.run, r.method, r.seeds,
                           r.final_best_mean, r.final_best_std, r.diversity_mean, r.angular_coverage_mean, r.nfe_mean);
    }
    return out;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "run,method,seeds,final_best_mean,final_best_std,diversity_mean,angular_coverage_mean,nfe_mean\n";
    for (const auto& r : rows) {
        out += r.run + "," + r.method + "," + std::to_string(r.seeds) + "," + format_double(r.final_best_mean) + "," +
               format_double(r.final_best_std) + "," + format_double(r.diversity_mean) + "," +
               format_double(r.angular_coverage_mean) + "," + format_double(r.nfe_mean) + "\n";
    }
    return out;
}

}  // namespace evo
