#include "specflow/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace specflow {

using nlohmann::json;

std::string to_string(GridKind grid) {
    switch (grid) {
        case GridKind::main: return "main";
        case GridKind::verifier: return "verifier";
        case GridKind::components: return "components";
        case GridKind::single: return "single";
    }
    return "?";
}

GridKind parse_grid(const std::string& name) {
    for (auto g : {GridKind::main, GridKind::verifier, GridKind::components, GridKind::single}) {
        if (to_string(g) == name) return g;
    }
    throw std::invalid_argument("unknown benchmark grid '" + name + "'");
}

std::string MethodSpec::label() const { return to_string(mode) + "/" + profile; }

MethodSpec MethodSpec::parse(const std::string& label) {
    const auto slash = label.find('/');
    if (slash == std::string::npos) {
        throw std::invalid_argument("method '" + label + "' must look like mode/profile");
    }
    return {parse_run_mode(label.substr(0, slash)), label.substr(slash + 1)};
}

Config Config::defaults() {
    Config c;
    for (const auto& name : builtin_profile_names()) c.profiles[name] = builtin_profile(name);
    c.runtime.verifier.gripper_window = c.runtime.replan;
    return c;
}

const CostProfile& Config::profile(const std::string& name) const {
    const auto it = profiles.find(name);
    if (it == profiles.end()) throw ConfigError("config: unknown cost profile '" + name + "'");
    return it->second;
}

PolicyShape Config::shape() const {
    return conveyor_policy_shape(env, policy.horizon, policy.embedding_dims);
}

void Config::validate() const {
    try {
        env.validate();
        env.variant_index(default_variant);
        for (const auto& v : bench.variants) env.variant_index(v);
        for (const auto& s : bench.speeds) env.speeds.units_per_tick(s);
        env.speeds.units_per_tick(dataset.speed);
        dataset.validate();
        shape().validate();
        draft.train.validate(policy.horizon);
        runtime.validate(policy.horizon);
        coupling.validate();
        for (const auto& [name, p] : profiles) p.validate();
        for (const auto& m : bench.methods) {
            const CostProfile& p = profile(m.profile);
            if (m.mode == RunMode::flash && !p.flash) {
                throw std::invalid_argument("method " + m.label() + " needs a profile with flash stages");
            }
        }
        profile(bench.baseline.profile);
        if (bench.trials < 1) throw std::invalid_argument("bench.trials must be positive");
        if (bench.threads < 1) throw std::invalid_argument("bench.threads must be positive");
        if (dataset.horizon != policy.horizon || dataset.replan != runtime.replan) {
            throw std::invalid_argument("dataset horizon/replan must match policy and runtime");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

namespace {

json stages_json(const FullStages& s) {
    return {{"image_encoder", s.image_encoder}, {"prefill", s.prefill}, {"denoise", s.denoise}};
}

json stages_json(const FlashStages& s) {
    return {{"image_encoder", s.image_encoder}, {"draft", s.draft}, {"verify", s.verify}};
}

json vec2(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + (path.empty() ? std::string("/") : path) + ": " + what);
}

std::string type_name(const json& j) {
    if (j.is_boolean()) return "boolean";
    if (j.is_number()) return "number";
    return j.type_name();
}

// Overlay `user` on `base`, which doubles as the schema.
void merge(json& base, const json& user, const std::string& path) {
    if (base.is_object()) {
        if (!user.is_object()) fail(path, "expected object, got " + type_name(user));
        const bool free_keys = path == "/latency/profiles";
        for (auto it = user.begin(); it != user.end(); ++it) {
            const std::string sub = path + "/" + it.key();
            if (!base.contains(it.key())) {
                if (!free_keys) fail(sub, "unknown key");
                base[it.key()] = it.value();
                continue;
            }
            merge(base[it.key()], it.value(), sub);
        }
        return;
    }
    if (type_name(base) != type_name(user)) {
        fail(path, "expected " + type_name(base) + ", got " + type_name(user));
    }
    base = user;
}

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const json& at(const std::string& key) const {
        if (!j_.is_object() || !j_.contains(key)) fail(path_ + "/" + key, "missing key");
        return j_.at(key);
    }
    Reader sub(const std::string& key) const { return {at(key), path_ + "/" + key}; }
    std::string child(const std::string& key) const { return path_ + "/" + key; }

    double number(const std::string& key) const { return as_number(at(key), child(key)); }
    int integer(const std::string& key) const { return as_int(at(key), child(key)); }
    std::uint64_t seed(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
            fail(child(key), "expected non-negative integer");
        }
        return v.get<std::uint64_t>();
    }
    bool boolean(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_boolean()) fail(child(key), "expected boolean");
        return v.get<bool>();
    }
    std::string string(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_string()) fail(child(key), "expected string");
        return v.get<std::string>();
    }
    const json& array(const std::string& key) const {
        const json& v = at(key);
        if (!v.is_array()) fail(child(key), "expected array");
        return v;
    }
    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        const json& a = array(key);
        for (std::size_t i = 0; i < a.size(); ++i) {
            out.push_back(as_number(a[i], child(key) + "/" + std::to_string(i)));
        }
        return out;
    }
    std::vector<int> integers(const std::string& key) const {
        std::vector<int> out;
        const json& a = array(key);
        for (std::size_t i = 0; i < a.size(); ++i) {
            out.push_back(as_int(a[i], child(key) + "/" + std::to_string(i)));
        }
        return out;
    }
    std::vector<std::string> strings(const std::string& key) const {
        std::vector<std::string> out;
        const json& a = array(key);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!a[i].is_string()) fail(child(key) + "/" + std::to_string(i), "expected string");
            out.push_back(a[i].get<std::string>());
        }
        return out;
    }
    Eigen::Vector2d point(const std::string& key) const {
        const auto v = numbers(key);
        if (v.size() != 2) fail(child(key), "expected [x, y]");
        return {v[0], v[1]};
    }

    static double as_number(const json& v, const std::string& path) {
        if (!v.is_number()) fail(path, "expected number, got " + type_name(v));
        return v.get<double>();
    }
    static int as_int(const json& v, const std::string& path) {
        if (!v.is_number_integer()) fail(path, "expected integer, got " + type_name(v));
        return v.get<int>();
    }

private:
    const json& j_;
    std::string path_;
};

CostProfile parse_profile(const std::string& name, const Reader& r) {
    CostProfile p;
    p.name = name;
    const Reader full = r.sub("full");
    p.full = {full.number("image_encoder"), full.number("prefill"), full.number("denoise")};
    if (r.at("flash").is_object()) {
        const Reader flash = r.sub("flash");
        p.flash = FlashStages{flash.number("image_encoder"), flash.number("draft"), flash.number("verify")};
    } else if (!r.at("flash").is_null()) {
        fail(r.child("flash"), "expected object or null");
    }
    return p;
}

template <typename F>
auto guarded(const std::string& path, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        fail(path, e.what());
    }
}

}  // namespace

json to_json(const Config& c) {
    json variants = json::array();
    for (const auto& v : c.env.variants) variants.push_back({{"name", v.name}, {"grasp_radius", v.grasp_radius}});
    json profiles = json::object();
    for (const auto& [name, p] : c.profiles) {
        profiles[name] = {{"full", stages_json(p.full)},
                          {"flash", p.flash ? stages_json(*p.flash) : json(nullptr)}};
    }
    json methods = json::array();
    for (const auto& m : c.bench.methods) methods.push_back(m.label());
    json fallbacks = json::array();
    for (bool b : c.bench.fallback_values) fallbacks.push_back(b);
    const auto& e = c.env;
    const auto& v = c.runtime.verifier;
    const auto& dt = c.draft.train;
    return {
        {"env",
         {{"gripper_speed", e.gripper_speed},
          {"belt_y", e.belt_y},
          {"station_x", e.station_x},
          {"workspace_x_max", e.workspace_x_max},
          {"bin", vec2(e.bin)},
          {"bin_radius", e.bin_radius},
          {"object_start_x", e.object_start_x},
          {"object_start_jitter", e.object_start_jitter},
          {"gripper_start", vec2(e.gripper_start)},
          {"gripper_start_jitter", e.gripper_start_jitter},
          {"close_fraction", e.close_fraction},
          {"intercept_margin", e.intercept_margin},
          {"max_ticks", e.max_ticks},
          {"variants", variants},
          {"default_variant", c.default_variant},
          {"speeds_m_per_min",
           {{"demo", e.speeds.demo},
            {"medium", e.speeds.medium},
            {"high", e.speeds.high},
            {"extra_high", e.speeds.extra_high}}},
          {"units_per_tick_per_m_per_min", e.speeds.units_per_tick_per_mpm}}},
        {"dataset",
         {{"episodes", c.dataset.episodes},
          {"speed", c.dataset.speed},
          {"speed_jitter", c.dataset.speed_jitter},
          {"stride", c.dataset.stride},
          {"stale_augment", c.dataset.stale_augment},
          {"action_noise", c.dataset.action_noise},
          {"noise_correlation", c.dataset.noise_correlation},
          {"seed", c.dataset_seed}}},
        {"policy",
         {{"horizon", c.policy.horizon},
          {"embedding_dims", c.policy.embedding_dims},
          {"encoder_hidden", c.policy.arch.encoder_hidden},
          {"field_hidden", c.policy.arch.field_hidden}}},
        {"train_main",
         {{"epochs", c.main.train.epochs},
          {"batch_size", c.main.train.batch_size},
          {"learning_rate", c.main.train.optim.learning_rate},
          {"weight_decay", c.main.train.optim.weight_decay},
          {"lr_floor_ratio", c.main.train.lr_floor_ratio},
          {"seed", c.main.seed}}},
        {"draft",
         {{"hidden", c.draft.hidden},
          {"target_source", to_string(dt.target_source)},
          {"beta", dt.beta},
          {"gamma_prefix", dt.gamma_prefix},
          {"tail_weight", dt.tail_weight},
          {"max_prefix", dt.max_prefix},
          {"epochs", dt.epochs},
          {"batch_size", dt.batch_size},
          {"learning_rate", dt.optim.learning_rate},
          {"weight_decay", dt.optim.weight_decay},
          {"lr_floor_ratio", dt.lr_floor_ratio},
          {"validation_fraction", dt.validation_fraction},
          {"select_steps", dt.select_steps},
          {"teacher_seed", c.draft.teacher_seed},
          {"seed", c.draft.seed}}},
        {"runtime",
         {{"mode", to_string(c.runtime.mode)},
          {"replan", c.runtime.replan},
          {"periodic_refresh", c.runtime.periodic_refresh},
          {"phase_fallback", c.runtime.phase_fallback},
          {"cap_prefix_at_replan", c.runtime.cap_prefix_at_replan},
          {"fallback_latency", to_string(c.runtime.fallback_latency)},
          {"denoise_steps", c.runtime.denoise.num_steps},
          {"verifier",
           {{"timesteps", v.timesteps},
            {"delta", v.delta},
            {"metric", to_string(v.metric)},
            {"gripper_window", v.gripper_window},
            {"parallel", v.parallel}}}}},
        {"latency", {{"control_tick_ms", c.coupling.control_tick_ms}, {"profiles", profiles}}},
        {"bench",
         {{"grid", to_string(c.bench.grid)},
          {"methods", methods},
          {"baseline", c.bench.baseline.label()},
          {"speeds", c.bench.speeds},
          {"variants", c.bench.variants},
          {"trials", c.bench.trials},
          {"threads", c.bench.threads},
          {"train_missing", c.bench.train_missing},
          {"deltas", c.bench.deltas},
          {"timestep_counts", c.bench.timestep_counts},
          {"refresh_values", c.bench.refresh_values},
          {"fallback_values", fallbacks}}},
        {"io", {{"out_dir", c.out_dir.string()}}},
    };
}

Config config_from_json(const json& user) {
    json merged = to_json(Config::defaults());
    merge(merged, user, "");
    const Reader root(merged, "");
    Config c;

    const Reader env = root.sub("env");
    auto& e = c.env;
    e.gripper_speed = env.number("gripper_speed");
    e.belt_y = env.number("belt_y");
    e.station_x = env.number("station_x");
    e.workspace_x_max = env.number("workspace_x_max");
    e.bin = env.point("bin");
    e.bin_radius = env.number("bin_radius");
    e.object_start_x = env.number("object_start_x");
    e.object_start_jitter = env.number("object_start_jitter");
    e.gripper_start = env.point("gripper_start");
    e.gripper_start_jitter = env.number("gripper_start_jitter");
    e.close_fraction = env.number("close_fraction");
    e.intercept_margin = env.number("intercept_margin");
    e.max_ticks = env.integer("max_ticks");
    e.variants.clear();
    const json& variants = env.array("variants");
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const Reader v(variants[i], env.child("variants") + "/" + std::to_string(i));
        e.variants.push_back({v.string("name"), v.number("grasp_radius")});
    }
    c.default_variant = env.string("default_variant");
    const Reader speeds = env.sub("speeds_m_per_min");
    e.speeds.demo = speeds.number("demo");
    e.speeds.medium = speeds.number("medium");
    e.speeds.high = speeds.number("high");
    e.speeds.extra_high = speeds.number("extra_high");
    e.speeds.units_per_tick_per_mpm = env.number("units_per_tick_per_m_per_min");

    const Reader policy = root.sub("policy");
    c.policy.horizon = policy.integer("horizon");
    c.policy.embedding_dims = policy.integer("embedding_dims");
    c.policy.arch.encoder_hidden = policy.integers("encoder_hidden");
    c.policy.arch.field_hidden = policy.integers("field_hidden");

    const Reader rt = root.sub("runtime");
    c.runtime.mode = guarded(rt.child("mode"), [&] { return parse_run_mode(rt.string("mode")); });
    c.runtime.replan = rt.integer("replan");
    c.runtime.periodic_refresh = rt.integer("periodic_refresh");
    c.runtime.phase_fallback = rt.boolean("phase_fallback");
    c.runtime.cap_prefix_at_replan = rt.boolean("cap_prefix_at_replan");
    c.runtime.fallback_latency = guarded(rt.child("fallback_latency"), [&] {
        return parse_fallback_latency(rt.string("fallback_latency"));
    });
    c.runtime.denoise.num_steps = rt.integer("denoise_steps");
    const Reader ver = rt.sub("verifier");
    c.runtime.verifier.timesteps = ver.numbers("timesteps");
    c.runtime.verifier.delta = ver.number("delta");
    c.runtime.verifier.metric = guarded(ver.child("metric"), [&] { return parse_metric(ver.string("metric")); });
    c.runtime.verifier.gripper_window = ver.integer("gripper_window");
    c.runtime.verifier.parallel = ver.boolean("parallel");

    const Reader ds = root.sub("dataset");
    c.dataset.episodes = ds.integer("episodes");
    c.dataset.speed = ds.string("speed");
    c.dataset.speed_jitter = ds.number("speed_jitter");
    c.dataset.stride = ds.integer("stride");
    c.dataset.stale_augment = ds.boolean("stale_augment");
    c.dataset.action_noise = ds.number("action_noise");
    c.dataset.noise_correlation = ds.number("noise_correlation");
    c.dataset.horizon = c.policy.horizon;
    c.dataset.replan = c.runtime.replan;
    c.dataset_seed = ds.seed("seed");

    const Reader tm = root.sub("train_main");
    c.main.train.epochs = tm.integer("epochs");
    c.main.train.batch_size = tm.integer("batch_size");
    c.main.train.optim.learning_rate = tm.number("learning_rate");
    c.main.train.optim.weight_decay = tm.number("weight_decay");
    c.main.train.lr_floor_ratio = tm.number("lr_floor_ratio");
    c.main.seed = tm.seed("seed");

    const Reader dr = root.sub("draft");
    auto& dt = c.draft.train;
    c.draft.hidden = dr.integers("hidden");
    dt.target_source = guarded(dr.child("target_source"), [&] {
        return parse_target_source(dr.string("target_source"));
    });
    dt.beta = dr.number("beta");
    dt.gamma_prefix = dr.number("gamma_prefix");
    dt.tail_weight = dr.number("tail_weight");
    dt.max_prefix = dr.integer("max_prefix");
    dt.epochs = dr.integer("epochs");
    dt.batch_size = dr.integer("batch_size");
    dt.optim.learning_rate = dr.number("learning_rate");
    dt.optim.weight_decay = dr.number("weight_decay");
    dt.lr_floor_ratio = dr.number("lr_floor_ratio");
    dt.validation_fraction = dr.number("validation_fraction");
    dt.select_steps = dr.integer("select_steps");
    c.draft.teacher_seed = dr.seed("teacher_seed");
    c.draft.seed = dr.seed("seed");

    const Reader lat = root.sub("latency");
    c.coupling.control_tick_ms = lat.number("control_tick_ms");
    const json& profiles = lat.at("profiles");
    if (!profiles.is_object()) fail(lat.child("profiles"), "expected object");
    c.profiles.clear();
    for (auto it = profiles.begin(); it != profiles.end(); ++it) {
        const std::string path = lat.child("profiles") + "/" + it.key();
        if (!it.value().is_object()) fail(path, "expected object");
        json p = it.value();
        if (!p.contains("flash")) p["flash"] = nullptr;
        c.profiles[it.key()] = parse_profile(it.key(), Reader(p, path));
    }

    const Reader b = root.sub("bench");
    c.bench.grid = guarded(b.child("grid"), [&] { return parse_grid(b.string("grid")); });
    c.bench.methods.clear();
    const auto labels = b.strings("methods");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        c.bench.methods.push_back(guarded(b.child("methods") + "/" + std::to_string(i),
                                          [&] { return MethodSpec::parse(labels[i]); }));
    }
    c.bench.baseline = guarded(b.child("baseline"), [&] { return MethodSpec::parse(b.string("baseline")); });
    c.bench.speeds = b.strings("speeds");
    c.bench.variants = b.strings("variants");
    c.bench.trials = b.integer("trials");
    c.bench.threads = b.integer("threads");
    c.bench.train_missing = b.boolean("train_missing");
    c.bench.deltas = b.numbers("deltas");
    c.bench.timestep_counts = b.integers("timestep_counts");
    c.bench.refresh_values = b.integers("refresh_values");
    c.bench.fallback_values.clear();
    const json& fbs = b.array("fallback_values");
    for (std::size_t i = 0; i < fbs.size(); ++i) {
        if (!fbs[i].is_boolean()) fail(b.child("fallback_values") + "/" + std::to_string(i), "expected boolean");
        c.bench.fallback_values.push_back(fbs[i].get<bool>());
    }

    c.out_dir = root.sub("io").string("out_dir");
    c.validate();
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_fingerprint(const Config& cfg) {
    json j = to_json(cfg);
    j.erase("io");
    return fnv1a_hex(j.dump());
}

}  // namespace specflow
