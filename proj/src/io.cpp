#include "protcoord/io.hpp"

#include "protcoord/errors.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace protcoord {

using nlohmann::json;

#ifndef PROTCOORD_DATA_DIR
#define PROTCOORD_DATA_DIR "data"
#endif
#ifndef PROTCOORD_FIXTURE_DIR
#define PROTCOORD_FIXTURE_DIR "fixtures"
#endif

fs::path default_data_dir()
{
    if (const char* env = std::getenv("PROTCOORD_DATA"); env && *env) return env;
    return PROTCOORD_DATA_DIR;
}

fs::path default_fixture_dir()
{
    if (const char* env = std::getenv("PROTCOORD_FIXTURES"); env && *env) return env;
    return PROTCOORD_FIXTURE_DIR;
}

fs::path resolve_input(const fs::path& p)
{
    if (fs::exists(p) || p.is_absolute()) return p;
    const fs::path alt = default_fixture_dir() / p;
    return fs::exists(alt) ? alt : p;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError(fmt::format("{}: cannot open file", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

// Maps JSON pointers to the line where their value starts. Only run on text
// that already parsed, to put line numbers on semantic errors.
class LineLocator {
public:
    explicit LineLocator(const std::string& text) : s_(text) { value(""); }

    int line(const std::string& pointer) const
    {
        auto it = lines_.find(pointer);
        return it == lines_.end() ? 0 : it->second;
    }

private:
    void ws()
    {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) {
            if (s_[i_] == '\n') ++line_;
            ++i_;
        }
    }

    std::string string_body()
    {
        std::string out;
        ++i_;  // opening quote
        while (i_ < s_.size() && s_[i_] != '"') {
            if (s_[i_] == '\\') {
                out.push_back(s_[i_ + 1]);
                i_ += 2;
                continue;
            }
            out.push_back(s_[i_++]);
        }
        ++i_;
        return out;
    }

    static std::string escape(const std::string& key)
    {
        std::string out;
        for (char c : key) {
            if (c == '~') out += "~0";
            else if (c == '/') out += "~1";
            else out.push_back(c);
        }
        return out;
    }

    void value(const std::string& ptr)
    {
        ws();
        lines_[ptr] = line_;
        if (i_ >= s_.size()) return;
        const char c = s_[i_];
        if (c == '{') {
            ++i_;
            for (;;) {
                ws();
                if (i_ >= s_.size() || s_[i_] == '}') break;
                const std::string key = string_body();
                ws();
                ++i_;  // ':'
                value(ptr + "/" + escape(key));
                ws();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
            }
            ++i_;
        } else if (c == '[') {
            ++i_;
            for (std::size_t idx = 0;; ++idx) {
                ws();
                if (i_ >= s_.size() || s_[i_] == ']') break;
                value(ptr + "/" + std::to_string(idx));
                ws();
                if (i_ < s_.size() && s_[i_] == ',') ++i_;
            }
            ++i_;
        } else if (c == '"') {
            string_body();
        } else {
            while (i_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[i_])) &&
                   s_[i_] != ',' && s_[i_] != ']' && s_[i_] != '}') {
                ++i_;
            }
        }
    }

    const std::string& s_;
    std::size_t i_ = 0;
    int line_ = 1;
    std::map<std::string, int> lines_;
};

struct Source {
    std::string name;
    const std::string* text = nullptr;

    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const
    {
        const int line = text ? LineLocator(*text).line(pointer) : 0;
        if (line > 0) {
            throw InputError(fmt::format("{}:{}: {}: {}", name, line, pointer.empty() ? "/" : pointer,
                                         message));
        }
        throw InputError(fmt::format("{}: {}: {}", name, pointer.empty() ? "/" : pointer, message));
    }
};

json parse_json(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        int line = 1;
        int col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw InputError(fmt::format("{}:{}:{}: malformed JSON", source, line, col));
    }
}

// Read-only view of one JSON object that rejects unknown keys.
class Obj {
public:
    Obj(const json& j, std::string pointer, const Source& src, std::set<std::string> allowed)
        : j_(j), ptr_(std::move(pointer)), src_(src)
    {
        if (!j_.is_object()) src_.fail(ptr_, "expected an object");
        allowed.insert("note");
        for (const auto& [key, _] : j_.items()) {
            if (!allowed.count(key)) src_.fail(child(key), fmt::format("unknown key '{}'", key));
        }
    }

    std::string child(const std::string& key) const { return ptr_ + "/" + key; }
    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const
    {
        if (!has(key)) src_.fail(ptr_, fmt::format("missing key '{}'", key));
        return j_.at(key);
    }
    const Source& source() const { return src_; }

    double number(const std::string& key) const
    {
        const auto& v = raw(key);
        if (!v.is_number()) src_.fail(child(key), "expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) src_.fail(child(key), "expected a finite number");
        return d;
    }
    double number(const std::string& key, double fallback) const
    {
        return has(key) ? number(key) : fallback;
    }
    double non_negative(const std::string& key, double fallback) const
    {
        const double d = number(key, fallback);
        if (d < 0.0) src_.fail(child(key), "must be non-negative");
        return d;
    }
    double positive(const std::string& key) const
    {
        const double d = number(key);
        if (!(d > 0.0)) src_.fail(child(key), "must be positive");
        return d;
    }
    long long integer(const std::string& key) const
    {
        const auto& v = raw(key);
        if (!v.is_number_integer()) src_.fail(child(key), "expected an integer");
        return v.get<long long>();
    }
    long long integer(const std::string& key, long long fallback) const
    {
        return has(key) ? integer(key) : fallback;
    }
    std::string string(const std::string& key) const
    {
        const auto& v = raw(key);
        if (!v.is_string()) src_.fail(child(key), "expected a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) const
    {
        return has(key) ? string(key) : fallback;
    }
    bool boolean(const std::string& key, bool fallback) const
    {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_boolean()) src_.fail(child(key), "expected true or false");
        return v.get<bool>();
    }
    const json& array(const std::string& key) const
    {
        const auto& v = raw(key);
        if (!v.is_array()) src_.fail(child(key), "expected an array");
        return v;
    }
    Obj object(const std::string& key, std::set<std::string> allowed) const
    {
        return Obj(raw(key), child(key), src_, std::move(allowed));
    }

    void header(const std::string& format, int version) const
    {
        if (string("format") != format) {
            src_.fail(child("format"), fmt::format("expected format '{}'", format));
        }
        if (integer("version") != version) {
            src_.fail(child("version"), fmt::format("unsupported version (expected {})", version));
        }
    }

private:
    const json& j_;
    std::string ptr_;
    const Source& src_;
};

void check_name(const Obj& o, const std::string& key, const std::string& name)
{
    const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
    if (!ok) {
        o.source().fail(o.child(key), "names use letters, digits, '_', '-' and '.' only");
    }
}

std::vector<CurvePoint> parse_points(const Obj& o, const std::string& key)
{
    std::vector<CurvePoint> pts;
    const auto& arr = o.array(key);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& p = arr[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
            o.source().fail(o.child(key) + "/" + std::to_string(i),
                            "expected [current_a, seconds]");
        }
        pts.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    return pts;
}

}  // namespace

CurveFamilies parse_curve_families(const std::string& text, const std::string& source)
{
    const json j = parse_json(text, source);
    const Source src{source, &text};
    const Obj top(j, "", src, {"format", "version", "families"});
    top.header("protcoord-curve-families", 1);
    CurveFamilies out;
    out.version = 1;
    const auto& fams = top.raw("families");
    if (!fams.is_object() || fams.empty()) src.fail("/families", "expected a non-empty object");
    for (const auto& [name, val] : fams.items()) {
        const Obj f(val, "/families/" + name, src, {"a", "b", "c", "m", "k"});
        TCIConstants c{f.number("a"), f.number("b"), f.number("c"), f.number("m"), f.number("k")};
        if (const auto errs = validate_tci_constants(c); !errs.empty()) {
            src.fail("/families/" + name, errs.front());
        }
        out.families[name] = c;
    }
    return out;
}

FuseLibrary parse_fuse_curves(const std::string& text, const std::string& source)
{
    const json j = parse_json(text, source);
    const Source src{source, &text};
    const Obj top(j, "", src, {"format", "version", "units", "curves"});
    top.header("protcoord-fuse-curves", 1);
    if (top.string("units") != "A") src.fail("/units", "fuse tables must be in amperes (\"A\")");
    FuseLibrary out;
    const auto& curves = top.raw("curves");
    if (!curves.is_object() || curves.empty()) src.fail("/curves", "expected a non-empty object");
    for (const auto& [id, val] : curves.items()) {
        const Obj c(val, "/curves/" + id, src, {"mm", "tc"});
        FuseCurve fc{id, parse_points(c, "mm"), parse_points(c, "tc")};
        if (const auto errs = validate_fuse_curve(fc); !errs.empty()) {
            src.fail("/curves/" + id, errs.front());
        }
        out[id] = std::move(fc);
    }
    return out;
}

Library load_library(const fs::path& families, const fs::path& fuses)
{
    return {parse_curve_families(read_text(families), families.string()),
            parse_fuse_curves(read_text(fuses), fuses.string())};
}

namespace {

NodeId node_ref(const Obj& o, const std::string& key, const std::vector<std::string>& buses,
                std::size_t node_count)
{
    const auto& v = o.raw(key);
    if (v.is_number_integer()) {
        const auto i = v.get<long long>();
        if (i < 0 || static_cast<std::size_t>(i) >= node_count) {
            o.source().fail(o.child(key), fmt::format("node {} does not exist", i));
        }
        return NodeId{static_cast<std::size_t>(i)};
    }
    if (v.is_string()) {
        const auto name = v.get<std::string>();
        auto it = std::find(buses.begin(), buses.end(), name);
        if (it == buses.end()) o.source().fail(o.child(key), fmt::format("unknown bus '{}'", name));
        return NodeId{static_cast<std::size_t>(it - buses.begin())};
    }
    o.source().fail(o.child(key), "expected a node index or bus name");
}

TripShot parse_shot(const Obj& o, ShotSpeed speed, double pickup, const CurveFamilies& fams)
{
    TripShot shot;
    shot.speed = speed;
    shot.family = o.string("family");
    if (!fams.families.count(shot.family)) {
        o.source().fail(o.child("family"), fmt::format("unknown curve family '{}'", shot.family));
    }
    shot.curve = fams.at(shot.family);
    shot.settings = {pickup, o.number("time_dial")};
    return shot;
}

}  // namespace

Network parse_network(const std::string& text, const std::string& source, const Library& lib)
{
    const json j = parse_json(text, source);
    const Source src{source, &text};
    const Obj top(j, "", src,
                  {"format", "version", "name", "bases", "buses", "source", "sections", "laterals",
                   "dg", "reclosers"});
    top.header("protcoord-network", 1);

    Network net;
    const Obj bases = top.object("bases", {"mva", "kv"});
    net.bases = {bases.positive("mva"), bases.positive("kv")};
    const double z_base = net.bases.impedance_ohm();
    const double i_base = net.bases.current_a();
    const double s_base_kva = net.bases.mva * 1000.0;

    const auto& sections = top.array("sections");
    const std::size_t node_count = sections.size() + 1;
    if (top.has("buses")) {
        const auto& b = top.array("buses");
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (!b[i].is_string()) src.fail("/buses/" + std::to_string(i), "expected a string");
            net.bus_names.push_back(b[i].get<std::string>());
        }
        if (net.bus_names.size() != node_count) {
            src.fail("/buses", fmt::format("{} names for {} nodes", net.bus_names.size(), node_count));
        }
    }

    const Obj s = top.object("source", {"voltage_pu", "r_ohm", "x_ohm"});
    net.source.voltage = s.number("voltage_pu", 1.0);
    net.source.impedance = {s.non_negative("r_ohm", 0.0) / z_base, s.non_negative("x_ohm", 0.0) / z_base};

    for (std::size_t i = 0; i < sections.size(); ++i) {
        const Obj o(sections[i], "/sections/" + std::to_string(i), src, {"from", "to", "r_ohm", "x_ohm"});
        net.sections.push_back({node_ref(o, "from", net.bus_names, node_count),
                                node_ref(o, "to", net.bus_names, node_count),
                                o.number("r_ohm") / z_base, o.number("x_ohm") / z_base});
    }

    if (top.has("laterals")) {
        const auto& arr = top.array("laterals");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const Obj o(arr[i], "/laterals/" + std::to_string(i), src,
                        {"name", "tap", "p_kw", "q_kvar", "r_ohm", "x_ohm", "fuse"});
            Lateral lat;
            lat.id = i;
            lat.name = o.string("name");
            check_name(o, "name", lat.name);
            lat.tap = node_ref(o, "tap", net.bus_names, node_count);
            lat.load_p = o.number("p_kw", 0.0) / s_base_kva;
            lat.load_q = o.number("q_kvar", 0.0) / s_base_kva;
            lat.r = o.non_negative("r_ohm", 0.0) / z_base;
            lat.x = o.non_negative("x_ohm", 0.0) / z_base;
            if (o.has("fuse")) {
                const auto id = o.string("fuse");
                auto it = lib.fuses.find(id);
                if (it == lib.fuses.end()) o.source().fail(o.child("fuse"), fmt::format("unknown fuse '{}'", id));
                lat.fuse = scale_fuse_currents(it->second, 1.0 / i_base);
            }
            net.laterals.push_back(std::move(lat));
        }
    }

    if (top.has("dg")) {
        const auto& arr = top.array("dg");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string ptr = "/dg/" + std::to_string(i);
            const auto& item = arr[i];
            if (!item.is_object() || !item.contains("kind") || !item["kind"].is_string()) {
                src.fail(ptr, "each DG needs a string 'kind'");
            }
            const auto kind = item["kind"].get<std::string>();
            std::set<std::string> keys{"name", "tap", "kind", "rating_kva", "p_kw", "q_kvar", "curtailable"};
            if (kind == "synchronous") {
                keys.insert("xd_subtransient");
            } else if (kind == "asynchronous") {
                keys.insert({"x_locked_rotor", "rated_slip"});
            } else if (kind == "inverter") {
                keys.insert({"k_off", "k_clamp", "coupling_x"});
            } else {
                src.fail(ptr + "/kind", fmt::format("unknown DG kind '{}' (synchronous, asynchronous, inverter)", kind));
            }
            const Obj o(item, ptr, src, keys);
            DGUnit dg;
            dg.id = i;
            dg.name = o.string("name");
            check_name(o, "name", dg.name);
            dg.tap = node_ref(o, "tap", net.bus_names, node_count);
            dg.rating_s = o.positive("rating_kva") / s_base_kva;
            dg.p_out = o.number("p_kw", 0.0) / s_base_kva;
            dg.q_out = o.number("q_kvar", 0.0) / s_base_kva;
            dg.curtailable = o.boolean("curtailable", false);
            if (kind == "synchronous") {
                dg.machine = SynchronousParams{o.number("xd_subtransient")};
            } else if (kind == "asynchronous") {
                dg.machine = AsynchronousParams{o.number("x_locked_rotor"), o.number("rated_slip", 0.02)};
            } else {
                InverterParams p;
                p.k_off = o.number("k_off", p.k_off);
                p.k_clamp = o.number("k_clamp", p.k_clamp);
                p.coupling_x = o.number("coupling_x", p.coupling_x);
                dg.machine = p;
            }
            net.dg_units.push_back(std::move(dg));
        }
    }

    if (top.has("reclosers")) {
        const auto& arr = top.array("reclosers");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const Obj o(arr[i], "/reclosers/" + std::to_string(i), src,
                        {"name", "node", "pickup_a", "pattern", "fast", "slow"});
            RecloserPlacement rec;
            rec.id = i;
            rec.name = o.string("name");
            check_name(o, "name", rec.name);
            rec.node = node_ref(o, "node", net.bus_names, node_count);
            const double pickup = o.positive("pickup_a") / i_base;
            const auto pattern = o.string("pattern");
            if (pattern.empty() || pattern.find_first_not_of("FS") != std::string::npos) {
                o.source().fail(o.child("pattern"), "pattern is a string of F and S, e.g. \"FFS\"");
            }
            std::optional<TripShot> fast;
            std::optional<TripShot> slow;
            if (pattern.find('F') != std::string::npos) {
                fast = parse_shot(o.object("fast", {"family", "time_dial"}), ShotSpeed::Fast, pickup, lib.families);
            } else if (o.has("fast")) {
                o.source().fail(o.child("fast"), "pattern has no fast shot");
            }
            if (pattern.find('S') != std::string::npos) {
                slow = parse_shot(o.object("slow", {"family", "time_dial"}), ShotSpeed::Slow, pickup, lib.families);
            } else if (o.has("slow")) {
                o.source().fail(o.child("slow"), "pattern has no slow shot");
            }
            for (char c : pattern) {
                rec.sequence.shots.push_back(c == 'F' ? *fast : *slow);
            }
            net.reclosers.push_back(std::move(rec));
        }
    }

    if (const auto v = validate(net); !v.empty()) {
        throw InputError(fmt::format("{}: invalid network: {}: {}", source, v.front().element, v.front().rule));
    }
    return net;
}

Network load_network(const fs::path& path, const Library& lib)
{
    return parse_network(read_text(path), path.string(), lib);
}

// ---------------------------------------------------------------- state

json state_to_json(const Network& network)
{
    const double s_kva = network.bases.mva * 1000.0;
    const double i_base = network.bases.current_a();
    json dg = json::object();
    for (const auto& u : network.dg_units) {
        dg[u.name] = {{"p_kw", u.p_out * s_kva}, {"q_kvar", u.q_out * s_kva}, {"q_per_p", dg_q_ratio(u)}};
    }
    json rec = json::object();
    for (const auto& r : network.reclosers) {
        const auto& st = r.sequence.first().settings;
        rec[r.name] = {{"pickup_a", st.pickup * i_base}, {"time_dial", st.time_dial}};
    }
    return {{"format", "protcoord-state"}, {"version", 1}, {"dg", dg}, {"reclosers", rec}};
}

Network apply_state(const Network& network, const json& state, const std::string& source)
{
    const std::string text = state.dump(2);
    const Source src{source, nullptr};
    const Obj top(state, "", src, {"format", "version", "dg", "reclosers"});
    top.header("protcoord-state", 1);
    Network out = network;
    const double s_kva = network.bases.mva * 1000.0;
    const double i_base = network.bases.current_a();
    if (top.has("dg")) {
        for (const auto& [name, val] : top.raw("dg").items()) {
            auto it = std::find_if(out.dg_units.begin(), out.dg_units.end(),
                                   [&](const DGUnit& u) { return u.name == name; });
            if (it == out.dg_units.end()) src.fail("/dg/" + name, "unknown DG");
            const Obj o(val, "/dg/" + name, src, {"p_kw", "q_kvar", "q_per_p"});
            it->p_out = o.number("p_kw") / s_kva;
            it->q_out = o.number("q_kvar") / s_kva;
            if (o.has("q_per_p")) it->q_per_p = o.number("q_per_p");
        }
    }
    if (top.has("reclosers")) {
        for (const auto& [name, val] : top.raw("reclosers").items()) {
            auto it = std::find_if(out.reclosers.begin(), out.reclosers.end(),
                                   [&](const RecloserPlacement& r) { return r.name == name; });
            if (it == out.reclosers.end()) src.fail("/reclosers/" + name, "unknown recloser");
            const Obj o(val, "/reclosers/" + name, src, {"pickup_a", "time_dial"});
            it->sequence.apply_first_curve_settings({o.positive("pickup_a") / i_base, o.number("time_dial")});
        }
    }
    if (const auto v = validate(out); !v.empty()) {
        throw InputError(fmt::format("{}: state makes the network invalid: {}: {}", source,
                                     v.front().element, v.front().rule));
    }
    return out;
}

Network with_curve_family(const Network& network, const CurveFamilies& families,
                          const std::string& family)
{
    const auto& c = families.at(family);
    Network out = network;
    for (auto& r : out.reclosers) {
        for (auto& s : r.sequence.shots) {
            s.family = family;
            s.curve = c;
        }
    }
    return out;
}

// ---------------------------------------------------------------- scenario

namespace {

fs::path relative_to(const fs::path& base_file, const std::string& p)
{
    const fs::path path(p);
    return path.is_absolute() ? path : base_file.parent_path() / path;
}

Scenario defaults_for(const fs::path& network_path, Library lib)
{
    Scenario sc;
    sc.network_path = network_path;
    sc.library = std::move(lib);
    sc.network = load_network(network_path, sc.library);
    for (const auto& dg : sc.network.dg_units) sc.available.push_back(dg.p_out);
    sc.profile = {sc.available};
    sc.timeseries.optimization = sc.optimization;
    return sc;
}

}  // namespace

Scenario scenario_for_network(const fs::path& network_path)
{
    const fs::path data = default_data_dir();
    auto sc = defaults_for(resolve_input(network_path),
                           load_library(data / "curve_families.json", data / "fuse_curves.json"));
    sc.source = sc.network_path;
    return sc;
}

Scenario load_scenario(const fs::path& path_in)
{
    const fs::path path = resolve_input(path_in);
    const std::string text = read_text(path);
    const std::string source = path.string();
    const json j = parse_json(text, source);
    const Source src{source, &text};
    const Obj top(j, "", src,
                  {"format", "version", "description", "network", "curve_families", "fuse_curves",
                   "initial_state", "margins", "fault", "coordination", "power_flow",
                   "optimization", "available_kw", "timeseries"});
    top.header("protcoord-scenario", 1);

    const fs::path data = default_data_dir();
    const fs::path fam = top.has("curve_families") ? relative_to(path, top.string("curve_families"))
                                                   : data / "curve_families.json";
    const fs::path fus = top.has("fuse_curves") ? relative_to(path, top.string("fuse_curves"))
                                                : data / "fuse_curves.json";
    Scenario sc = defaults_for(relative_to(path, top.string("network")), load_library(fam, fus));
    sc.source = path;
    auto& study = sc.optimization.study;
    const double z_base = sc.network.bases.impedance_ohm();
    const double s_kva = sc.network.bases.mva * 1000.0;

    if (top.has("initial_state")) {
        const fs::path st = relative_to(path, top.string("initial_state"));
        sc.network = apply_state(sc.network, parse_json(read_text(st), st.string()), st.string());
    }
    if (top.has("margins")) {
        const Obj o = top.object("margins", {"fuse_recloser_s", "recloser_recloser_s"});
        study.margins.fuse_recloser = o.number("fuse_recloser_s", study.margins.fuse_recloser);
        study.margins.recloser_recloser = o.number("recloser_recloser_s", study.margins.recloser_recloser);
        if (!(study.margins.fuse_recloser > 0.0) || !(study.margins.recloser_recloser > 0.0)) {
            src.fail("/margins", "margins must be positive");
        }
    }
    if (top.has("fault")) {
        const Obj o = top.object("fault", {"min_fault_impedance_ohm"});
        study.fault.fault_impedance = o.non_negative("min_fault_impedance_ohm", 0.0) / z_base;
    }
    if (top.has("coordination")) {
        const Obj o = top.object("coordination", {"points_per_decade", "independent_currents",
                                                  "fuse_scheme", "range_basis"});
        const auto ppd = o.integer("points_per_decade", 200);
        if (ppd < 1) src.fail("/coordination/points_per_decade", "must be at least 1");
        study.coordination.points_per_decade = static_cast<int>(ppd);
        study.coordination.independent_currents = o.boolean("independent_currents", false);
        const auto scheme = o.string("fuse_scheme", "saving");
        if (scheme == "saving") study.fuse_scheme = FuseScheme::Saving;
        else if (scheme == "sacrificing") study.fuse_scheme = FuseScheme::Sacrificing;
        else src.fail("/coordination/fuse_scheme", "expected \"saving\" or \"sacrificing\"");
        const auto basis = o.string("range_basis", "fresh");
        if (basis == "fresh") study.range_basis = RangeBasis::Fresh;
        else if (basis == "passive") study.range_basis = RangeBasis::Passive;
        else src.fail("/coordination/range_basis", "expected \"fresh\" or \"passive\"");
    }
    if (top.has("power_flow")) {
        const Obj o = top.object("power_flow", {"tol", "max_iter"});
        study.power_flow.tol = o.number("tol", study.power_flow.tol);
        study.power_flow.max_iter = static_cast<int>(o.integer("max_iter", study.power_flow.max_iter));
        if (!(study.power_flow.tol > 0.0) || study.power_flow.max_iter < 1) {
            src.fail("/power_flow", "tol must be positive and max_iter at least 1");
        }
    }
    if (top.has("optimization")) {
        const Obj o = top.object("optimization", {"tol", "max_iters", "cycle_window", "settings_headroom_s"});
        sc.optimization.tol = o.number("tol", sc.optimization.tol);
        sc.optimization.max_iters = static_cast<int>(o.integer("max_iters", sc.optimization.max_iters));
        sc.optimization.cycle_window = static_cast<int>(o.integer("cycle_window", sc.optimization.cycle_window));
        sc.optimization.settings_headroom = o.non_negative("settings_headroom_s", 0.0);
        if (!(sc.optimization.tol > 0.0) || sc.optimization.max_iters < 1) {
            src.fail("/optimization", "tol must be positive and max_iters at least 1");
        }
    }

    auto dg_index = [&](const std::string& ptr, const std::string& name) {
        const auto& units = sc.network.dg_units;
        auto it = std::find_if(units.begin(), units.end(), [&](const DGUnit& u) { return u.name == name; });
        if (it == units.end()) src.fail(ptr, fmt::format("unknown DG '{}'", name));
        return static_cast<std::size_t>(it - units.begin());
    };
    if (top.has("available_kw")) {
        const auto& av = top.raw("available_kw");
        if (!av.is_object()) src.fail("/available_kw", "expected an object of DG name -> kW");
        for (const auto& [name, v] : av.items()) {
            const std::string ptr = "/available_kw/" + name;
            if (!v.is_number() || v.get<double>() < 0.0) src.fail(ptr, "expected a non-negative number");
            sc.available[dg_index(ptr, name)] = v.get<double>() / s_kva;
        }
    }

    sc.timeseries.optimization = sc.optimization;
    sc.profile = {sc.available};
    if (top.has("timeseries")) {
        const Obj o = top.object("timeseries", {"dispatch_every", "settings_every", "profile_kw"});
        sc.timeseries.dispatch_every = static_cast<int>(o.integer("dispatch_every", 1));
        sc.timeseries.settings_every = static_cast<int>(o.integer("settings_every", 5));
        const int de = sc.timeseries.dispatch_every;
        const int se = sc.timeseries.settings_every;
        if (de < 1 || se < de || se % de != 0) {
            src.fail("/timeseries", "settings_every must be a positive multiple of dispatch_every");
        }
        if (o.has("profile_kw")) {
            const auto& prof = o.raw("profile_kw");
            if (!prof.is_object() || prof.empty()) src.fail("/timeseries/profile_kw", "expected an object of DG name -> [kW...]");
            std::size_t steps = 0;
            for (const auto& [name, series] : prof.items()) {
                const std::string ptr = "/timeseries/profile_kw/" + name;
                if (!series.is_array() || series.empty()) src.fail(ptr, "expected a non-empty array");
                if (steps != 0 && series.size() != steps) src.fail(ptr, "every profile needs the same length");
                steps = series.size();
            }
            sc.profile.assign(steps, sc.available);
            for (const auto& [name, series] : prof.items()) {
                const std::string ptr = "/timeseries/profile_kw/" + name;
                const std::size_t i = dg_index(ptr, name);
                for (std::size_t t = 0; t < steps; ++t) {
                    if (!series[t].is_number() || series[t].get<double>() < 0.0) {
                        src.fail(ptr + "/" + std::to_string(t), "expected a non-negative number");
                    }
                    sc.profile[t][i] = series[t].get<double>() / s_kva;
                }
            }
        }
    }
    return sc;
}

// ---------------------------------------------------------------- CSV

std::string fmt_num(double v, int precision)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::string s = fmt::format("{:.{}f}", v, precision);
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

namespace {

std::string join(const std::vector<std::string>& cells)
{
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out.push_back(',');
        out += cells[i];
    }
    return out;
}

const char* yes_no(bool b) { return b ? "1" : "0"; }

}  // namespace

std::size_t write_powerflow_csv(std::ostream& os, const Network& network, const PowerFlowSolution& sol)
{
    const double s_kva = network.bases.mva * 1000.0;
    os << "# protcoord powerflow v1\n";
    os << "node,bus,v_pu,angle_deg,p_send_kw,q_send_kvar\n";
    const std::size_t n = network.node_count();
    for (std::size_t i = 0; i < n; ++i) {
        const bool has_section = i + 1 < n;
        os << join({std::to_string(i), network.node_label(NodeId{i}), fmt_num(sol.v_mag[i], 8),
                    fmt_num(sol.v_angle[i] * 180.0 / M_PI, 6),
                    has_section ? fmt_num(sol.p_flow[i] * s_kva, 4) : "",
                    has_section ? fmt_num(sol.q_flow[i] * s_kva, 4) : ""})
           << '\n';
    }
    return n;
}

std::size_t write_fault_csv(std::ostream& os, const Network& network, const FaultStudy& study)
{
    const double ib = network.bases.current_a();
    os << "# protcoord fault v1 location=" << to_string(study.location) << '\n';
    os << "element,id,name,current_a,delta_fr_a,delta_rr_a\n";
    std::size_t rows = 0;
    auto row = [&](std::vector<std::string> cells) {
        os << join(cells) << '\n';
        ++rows;
    };
    row({"fault", "", "", fmt_num(study.i_fault * ib, 4), "", ""});
    row({"substation", "", "", fmt_num(study.i_substation * ib, 4), "", ""});
    for (const auto& [k, i] : study.i_recloser) {
        row({"recloser", std::to_string(k), network.reclosers[k].name, fmt_num(i * ib, 4),
             fmt_num(study.delta_fr.at(k) * ib, 4), fmt_num(study.delta_rr.at(k) * ib, 4)});
    }
    for (const auto& [l, i] : study.i_fuse) {
        row({"fuse", std::to_string(l), network.laterals[l].name, fmt_num(i * ib, 4), "", ""});
    }
    for (const auto& [g, i] : study.i_dg) {
        row({"dg", std::to_string(g), network.dg_units[g].name, fmt_num(i * ib, 4), "", ""});
    }
    return rows;
}

std::size_t write_pairs_csv(std::ostream& os, const Network& network,
                            const std::vector<PairInstance>& pairs,
                            const std::vector<CoordinationReport>& reports)
{
    const double ib = network.bases.current_a();
    os << "# protcoord pairs v1\n";
    os << "pair,kind,primary,backup,range_lo_a,range_hi_a,margin_s,range_ok,margin_ok,"
          "worst_margin_s,worst_current_a,failure_mode,backup_delay_s\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& p = pairs[i].pair;
        const auto& r = reports[i];
        os << join({r.pair_label,
                    r.kind == PairKind::FuseRecloser ? "fuse-recloser" : "recloser-recloser",
                    device_label(p.primary), device_label(p.backup), fmt_num(p.range.lo * ib, 4),
                    fmt_num(p.range.hi * ib, 4), fmt_num(p.margin, 4), yes_no(r.range_ok),
                    yes_no(r.margin_ok), fmt_num(r.worst_margin, 6),
                    fmt_num(r.worst_current * ib, 4), to_string(r.failure_mode),
                    r.backup_delay ? fmt_num(*r.backup_delay, 6) : ""})
           << '\n';
    }
    return reports.size();
}

std::size_t write_curve_samples_csv(std::ostream& os, const Network& network,
                                    const std::vector<CoordinationReport>& reports)
{
    const double ib = network.bases.current_a();
    os << "# protcoord curve-samples v1\n";
    os << "pair,i_primary_a,i_backup_a,t_primary_s,t_backup_s\n";
    std::size_t rows = 0;
    for (const auto& r : reports) {
        for (const auto& s : r.samples) {
            os << join({r.pair_label, fmt_num(s.i_primary * ib, 4), fmt_num(s.i_backup * ib, 4),
                        fmt_num(s.t_primary, 6), fmt_num(s.t_backup, 6)})
               << '\n';
            ++rows;
        }
    }
    return rows;
}

std::size_t write_trace_csv(std::ostream& os, const Network& network, const OptimizationTrace& trace)
{
    const double s_kva = network.bases.mva * 1000.0;
    const double ib = network.bases.current_a();
    os << "# protcoord trace v1\n";
    std::vector<std::string> head{"iter", "total_clearing_time_s", "total_dg_kw", "worst_slack_s",
                                  "settings_lp_feasible", "coordinated"};
    for (const auto& dg : network.dg_units) head.push_back(dg.name + "_kw");
    for (const auto& r : network.reclosers) head.push_back(r.name + "_tds");
    for (const auto& r : network.reclosers) head.push_back(r.name + "_pickup_a");
    head.push_back("note");
    os << join(head) << '\n';
    for (const auto& it : trace.iterations) {
        std::vector<std::string> row{std::to_string(it.k), fmt_num(it.obj_clearing_time, 6),
                                     fmt_num(it.obj_dg_output * s_kva, 4), fmt_num(it.worst_slack, 6),
                                     yes_no(it.settings_lp_feasible), yes_no(it.coordinated)};
        for (double p : it.dg_outputs) row.push_back(fmt_num(p * s_kva, 4));
        for (const auto& s : it.settings) row.push_back(fmt_num(s.time_dial, 6));
        for (const auto& s : it.settings) row.push_back(fmt_num(s.pickup * ib, 4));
        row.push_back(it.note);
        os << join(row) << '\n';
    }
    return trace.iterations.size();
}

std::size_t write_timeseries_csv(std::ostream& os, const Network& network, const TimeseriesResult& result)
{
    const double s_kva = network.bases.mva * 1000.0;
    os << "# protcoord timeseries v1\n";
    std::vector<std::string> head{"step"};
    for (const auto& dg : network.dg_units) head.push_back(dg.name + "_avail_kw");
    for (const auto& dg : network.dg_units) head.push_back(dg.name + "_kw");
    for (const auto& r : network.reclosers) head.push_back(r.name + "_tds");
    for (const char* h : {"total_clearing_time_s", "worst_slack_s", "dispatched", "settings_updated", "status"}) {
        head.push_back(h);
    }
    os << join(head) << '\n';
    for (const auto& st : result.steps) {
        std::vector<std::string> row{std::to_string(st.step)};
        for (double a : st.available) row.push_back(fmt_num(a * s_kva, 4));
        for (double p : st.dg_outputs) row.push_back(fmt_num(p * s_kva, 4));
        for (const auto& s : st.settings) row.push_back(fmt_num(s.time_dial, 6));
        row.push_back(fmt_num(st.total_clearing_time, 6));
        row.push_back(fmt_num(st.worst_slack, 6));
        row.push_back(yes_no(st.dispatched));
        row.push_back(yes_no(st.settings_updated));
        row.push_back(st.status);
        os << join(row) << '\n';
    }
    return result.steps.size();
}

}  // namespace protcoord
