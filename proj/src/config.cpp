#include "mfgexec/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace mfgexec {

namespace {

std::string where(const YAML::Node& node)
{
    const auto mark = node.Mark();
    if (mark.is_null())
        return "";
    return "line " + std::to_string(mark.line + 1) + ": ";
}

/// Reads one mapping, remembering which keys were consumed so that leftovers
/// can be reported as unknown.
class MapReader
{
public:
    MapReader(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_ || !node_.IsMap())
            throw ConfigError(where(node_) + "'" + path_ + "' must be a mapping");
    }

    bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }

    YAML::Node child(const std::string& key)
    {
        const YAML::Node c = node_[key];
        if (!c)
            throw ConfigError(where(node_) + "missing required key '" + qualified(key) + "'");
        seen_.insert(key);
        return c;
    }

    template <class T>
    T get(const std::string& key)
    {
        return convert<T>(child(key), qualified(key));
    }

    template <class T>
    T get_or(const std::string& key, T fallback)
    {
        if (!has(key))
            return fallback;
        return get<T>(key);
    }

    void finish() const
    {
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key))
                throw ConfigError(where(kv.first) + "unknown key '" + qualified(key) + "'");
        }
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    template <class T>
    static T convert(const YAML::Node& node, const std::string& name)
    {
        try {
            return node.as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(where(node) + "key '" + name + "' has a value of the wrong type");
        }
    }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

Eigen::VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

LatentMarketModel read_market(MapReader r)
{
    LatentMarketModel m;
    m.theta_states = to_vector(r.get<std::vector<double>>("theta_states"));
    const YAML::Node gen = r.child("generator");
    const auto rows = MapReader::convert<std::vector<std::vector<double>>>(gen, r.qualified("generator"));
    m.generator.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.size())
            throw ConfigError(where(gen) + "key 'market.generator' must be a square matrix");
        for (std::size_t j = 0; j < rows.size(); ++j)
            m.generator(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    m.prior = to_vector(r.get<std::vector<double>>("prior"));
    m.kappa = r.get<double>("kappa");
    m.sigma = r.get<double>("sigma");
    m.alpha_tick = r.get<double>("alpha_tick");
    m.f0 = r.get<double>("f0");
    m.horizon = r.get<double>("horizon");
    r.finish();
    return m;
}

void read_population(MapReader r, GameSpec& spec)
{
    spec.population.lambda = r.get<double>("lambda");
    const YAML::Node subs = r.child("subpops");
    if (!subs.IsSequence() || subs.size() == 0)
        throw ConfigError(where(subs) + "key 'population.subpops' must be a non-empty list");
    std::vector<bool> has_p;
    for (std::size_t k = 0; k < subs.size(); ++k) {
        MapReader s(subs[k], "population.subpops[" + std::to_string(k) + "]");
        SubPopulationSpec sub;
        sub.a = s.get<double>("a");
        sub.phi = s.get<double>("phi");
        sub.psi = s.get<double>("psi");
        has_p.push_back(s.has("p"));
        sub.p = s.get_or<double>("p", 0.0);
        sub.m0 = s.get<double>("m0");
        sub.s0 = s.get<double>("s0");
        spec.n_agents_per_subpop.push_back(s.get<std::size_t>("n_agents"));
        s.finish();
        spec.population.subpops.push_back(sub);
    }
    const auto shares = empirical_proportions(spec.n_agents_per_subpop);
    for (std::size_t k = 0; k < has_p.size(); ++k)
        if (!has_p[k])
            spec.population.subpops[k].p = shares[k];
    if (r.has("target_shift"))
        spec.target_shift = r.get<std::vector<double>>("target_shift");
    r.finish();
}

RunConfig read_run(MapReader r)
{
    RunConfig run;
    const YAML::Node mode = r.child("mode");
    try {
        run.mode = parse_run_mode(MapReader::convert<std::string>(mode, "run.mode"));
    } catch (const ValidationError& e) {
        throw ConfigError(where(mode) + e.what());
    }
    run.n_steps = r.get<std::size_t>("n_steps");
    run.seed = r.get<std::uint64_t>("seed");
    run.replications = r.get<std::size_t>("replications");
    run.output_dir = r.get<std::string>("output_dir");
    if (r.has("forced_theta")) {
        const YAML::Node ft = r.child("forced_theta");
        if (!ft.IsSequence())
            throw ConfigError(where(ft) + "key 'run.forced_theta' must be a list of [time, state] pairs");
        ForcedTheta path;
        for (const auto& entry : ft) {
            if (!entry.IsSequence() || entry.size() != 2)
                throw ConfigError(where(entry) + "key 'run.forced_theta' entries must be [time, state] pairs");
            path.emplace_back(MapReader::convert<double>(entry[0], "run.forced_theta"),
                              MapReader::convert<std::size_t>(entry[1], "run.forced_theta"));
        }
        run.forced_theta = path;
    }
    run.filter_substeps = r.get_or<std::size_t>("filter_substeps", run.filter_substeps);
    run.record_paths = r.get_or<bool>("record_paths", run.record_paths);
    run.initial_cash = r.get_or<double>("initial_cash", run.initial_cash);
    if (r.has("nash")) {
        MapReader nash(r.child("nash"), "run.nash");
        run.nash_n_values = nash.get_or<std::vector<std::size_t>>("n_values", run.nash_n_values);
        run.nash_method = nash.get_or<std::string>("method", run.nash_method);
        nash.finish();
    }
    r.finish();
    if (run.n_steps == 0)
        throw ValidationError("run.n_steps", "at least one step is required");
    if (run.replications == 0)
        throw ValidationError("run.replications", "at least one replication is required");
    if (run.nash_method != "deterministic-best-response" && run.nash_method != "perturbation-family")
        throw ValidationError("run.nash.method", "must be deterministic-best-response or perturbation-family");
    return run;
}

ScenarioConfig read_document(const YAML::Node& root)
{
    MapReader top(root, "");
    ScenarioConfig cfg;
    cfg.spec.market = read_market(MapReader(top.child("market"), "market"));
    read_population(MapReader(top.child("population"), "population"), cfg.spec);
    cfg.run = read_run(MapReader(top.child("run"), "run"));
    top.finish();
    cfg.spec = validate(cfg.spec);
    if (cfg.run.forced_theta)
        validate_forced_theta(*cfg.run.forced_theta, cfg.spec.market);
    return cfg;
}

void emit_document(YAML::Emitter& out, const ScenarioConfig& c)
{
    const auto& m = c.spec.market;
    const auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "market" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "theta_states" << YAML::Value << YAML::Flow << vec(m.theta_states);
    out << YAML::Key << "generator" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < m.generator.rows(); ++i)
        out << YAML::Flow << vec(m.generator.row(i).transpose());
    out << YAML::EndSeq;
    out << YAML::Key << "prior" << YAML::Value << YAML::Flow << vec(m.prior);
    out << YAML::Key << "kappa" << YAML::Value << m.kappa;
    out << YAML::Key << "sigma" << YAML::Value << m.sigma;
    out << YAML::Key << "alpha_tick" << YAML::Value << m.alpha_tick;
    out << YAML::Key << "f0" << YAML::Value << m.f0;
    out << YAML::Key << "horizon" << YAML::Value << m.horizon;
    out << YAML::EndMap;

    out << YAML::Key << "population" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "lambda" << YAML::Value << c.spec.population.lambda;
    out << YAML::Key << "subpops" << YAML::Value << YAML::BeginSeq;
    for (std::size_t k = 0; k < c.spec.population.size(); ++k) {
        const auto& s = c.spec.population.subpops[k];
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "a" << YAML::Value << s.a;
        out << YAML::Key << "phi" << YAML::Value << s.phi;
        out << YAML::Key << "psi" << YAML::Value << s.psi;
        out << YAML::Key << "p" << YAML::Value << s.p;
        out << YAML::Key << "m0" << YAML::Value << s.m0;
        out << YAML::Key << "s0" << YAML::Value << s.s0;
        out << YAML::Key << "n_agents" << YAML::Value << c.spec.n_agents_per_subpop[k];
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    if (c.spec.target_shift)
        out << YAML::Key << "target_shift" << YAML::Value << YAML::Flow << *c.spec.target_shift;
    out << YAML::EndMap;

    const auto& r = c.run;
    out << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << to_string(r.mode);
    out << YAML::Key << "n_steps" << YAML::Value << r.n_steps;
    out << YAML::Key << "seed" << YAML::Value << r.seed;
    out << YAML::Key << "replications" << YAML::Value << r.replications;
    out << YAML::Key << "output_dir" << YAML::Value << YAML::DoubleQuoted << r.output_dir;
    if (r.forced_theta) {
        out << YAML::Key << "forced_theta" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (const auto& [t, idx] : *r.forced_theta)
            out << YAML::Flow << YAML::BeginSeq << t << idx << YAML::EndSeq;
        out << YAML::EndSeq;
    }
    out << YAML::Key << "filter_substeps" << YAML::Value << r.filter_substeps;
    out << YAML::Key << "record_paths" << YAML::Value << r.record_paths;
    out << YAML::Key << "initial_cash" << YAML::Value << r.initial_cash;
    out << YAML::Key << "nash" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n_values" << YAML::Value << YAML::Flow << r.nash_n_values;
    out << YAML::Key << "method" << YAML::Value << r.nash_method;
    out << YAML::EndMap;
    out << YAML::EndMap;
    out << YAML::EndMap;
}

bool same(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y)
{
    return x.rows() == y.rows() && x.cols() == y.cols() && (x.array() == y.array()).all();
}

}  // namespace

const char* to_string(RunMode mode)
{
    switch (mode) {
    case RunMode::equilibrium:
        return "equilibrium";
    case RunMode::simulate:
        return "simulate";
    case RunMode::nash_gap:
        return "nash-gap";
    case RunMode::filter_demo:
        return "filter-demo";
    }
    return "simulate";
}

RunMode parse_run_mode(const std::string& text)
{
    if (text == "equilibrium")
        return RunMode::equilibrium;
    if (text == "simulate")
        return RunMode::simulate;
    if (text == "nash-gap")
        return RunMode::nash_gap;
    if (text == "filter-demo")
        return RunMode::filter_demo;
    throw ValidationError("run.mode", "unknown mode '" + text + "'");
}

bool operator==(const ScenarioConfig& x, const ScenarioConfig& y)
{
    const auto& mx = x.spec.market;
    const auto& my = y.spec.market;
    return x.spec.population == y.spec.population && same(mx.theta_states, my.theta_states) &&
           same(mx.generator, my.generator) && same(mx.prior, my.prior) && mx.kappa == my.kappa &&
           mx.sigma == my.sigma && mx.alpha_tick == my.alpha_tick && mx.f0 == my.f0 && mx.horizon == my.horizon &&
           x.spec.n_agents_per_subpop == y.spec.n_agents_per_subpop && x.spec.target_shift == y.spec.target_shift &&
           x.run == y.run;
}

ScenarioConfig parse_config_text(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    return read_document(root);
}

ScenarioConfig parse_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_config_text(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string emit_config(const ScenarioConfig& config)
{
    YAML::Emitter out;
    emit_document(out, config);
    return std::string(out.c_str()) + "\n";
}

std::string emit_config_inline(const ScenarioConfig& config)
{
    YAML::Emitter out;
    out.SetMapFormat(YAML::Flow);
    out.SetSeqFormat(YAML::Flow);
    emit_document(out, config);
    std::string s = out.c_str();
    for (char& ch : s)
        if (ch == '\n')
            ch = ' ';
    return s;
}

}  // namespace mfgexec
