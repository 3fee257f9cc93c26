#include "thinflow/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace thinflow {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw config_error(msg); }

[[noreturn]] void fail_at(int line, const std::string& msg) {
    fail("toml line " + std::to_string(line) + ": " + msg);
}

// ---- TOML subset reader -------------------------------------------------

std::string strip_comment(const std::string& line, int lineno) {
    std::string out;
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (in_str) {
            if (ch == '\\') {
                out += ch;
                if (i + 1 >= line.size()) fail_at(lineno, "dangling escape");
                out += line[++i];
                continue;
            }
            if (ch == '"') in_str = false;
        } else {
            if (ch == '#') break;
            if (ch == '"') in_str = true;
        }
        out += ch;
    }
    if (in_str) fail_at(lineno, "unterminated string");
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool bare_key_ok(const std::string& k) {
    if (k.empty()) return false;
    for (char ch : k)
        if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-')
            return false;
    return true;
}

json parse_scalar(const std::string& tok, int lineno);

json parse_value(const std::string& tok, int lineno) {
    if (!tok.empty() && tok.front() == '[') {
        if (tok.back() != ']') fail_at(lineno, "unterminated array");
        json arr = json::array();
        std::string body = tok.substr(1, tok.size() - 2);
        std::string cur;
        int depth = 0;
        bool in_str = false;
        auto flush = [&] {
            std::string t = trim(cur);
            if (!t.empty()) arr.push_back(parse_value(t, lineno));
            cur.clear();
        };
        for (std::size_t i = 0; i < body.size(); ++i) {
            char ch = body[i];
            if (in_str) {
                cur += ch;
                if (ch == '\\' && i + 1 < body.size()) cur += body[++i];
                else if (ch == '"') in_str = false;
                continue;
            }
            if (ch == '"') in_str = true;
            if (ch == '[') ++depth;
            if (ch == ']') --depth;
            if (ch == ',' && depth == 0) {
                flush();
                continue;
            }
            cur += ch;
        }
        flush();
        return arr;
    }
    return parse_scalar(tok, lineno);
}

json parse_scalar(const std::string& tok, int lineno) {
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
            char ch = tok[i];
            if (ch == '\\') {
                if (i + 2 >= tok.size() + 1) fail_at(lineno, "dangling escape");
                char e = tok[++i];
                switch (e) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    default: fail_at(lineno, std::string("unsupported escape \\") + e);
                }
            } else if (ch == '"') {
                fail_at(lineno, "stray quote inside string");
            } else {
                out += ch;
            }
        }
        return json(out);
    }
    if (tok == "true") return json(true);
    if (tok == "false") return json(false);

    const char* c = tok.c_str();
    char* end = nullptr;
    if (tok.find_first_of(".eE") == std::string::npos) {
        long long v = std::strtoll(c, &end, 10);
        if (end == c + tok.size() && end != c) return json(v);
    }
    double d = std::strtod(c, &end);
    if (end == c + tok.size() && end != c && std::isfinite(d)) return json(d);
    fail_at(lineno, "cannot parse value '" + tok + "'");
}

std::vector<std::string> split_dotted(const std::string& name, int lineno) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : name) {
        if (ch == '.') {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(trim(cur));
    for (const std::string& p : parts)
        if (!bare_key_ok(p)) fail_at(lineno, "bad table name '" + name + "'");
    return parts;
}

json* descend(json& root, const std::vector<std::string>& parts, int lineno) {
    json* t = &root;
    for (const std::string& p : parts) {
        json& slot = (*t)[p];
        if (slot.is_null()) slot = json::object();
        if (slot.is_array()) {
            if (slot.empty()) fail_at(lineno, "empty table array '" + p + "'");
            t = &slot.back();
        } else if (slot.is_object()) {
            t = &slot;
        } else {
            fail_at(lineno, "'" + p + "' is not a table");
        }
    }
    return t;
}

json toml_to_json(const std::string& text) {
    json root = json::object();
    json* table = &root;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(strip_comment(raw, lineno));
        if (line.empty()) continue;

        if (line.front() == '[') {
            bool array_of_tables = line.size() > 1 && line[1] == '[';
            std::size_t close = line.find(array_of_tables ? "]]" : "]");
            if (close == std::string::npos ||
                trim(line.substr(close + (array_of_tables ? 2 : 1))) != "")
                fail_at(lineno, "malformed table header");
            std::string name =
                line.substr(array_of_tables ? 2 : 1, close - (array_of_tables ? 2 : 1));
            std::vector<std::string> parts = split_dotted(trim(name), lineno);
            if (array_of_tables) {
                std::vector<std::string> head(parts.begin(), parts.end() - 1);
                json* parent = descend(root, head, lineno);
                json& slot = (*parent)[parts.back()];
                if (slot.is_null()) slot = json::array();
                if (!slot.is_array()) fail_at(lineno, "'" + parts.back() + "' is not a table array");
                slot.push_back(json::object());
                table = &slot.back();
            } else {
                table = descend(root, parts, lineno);
            }
            continue;
        }

        std::size_t eq = std::string::npos;
        bool in_str = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_str = !in_str;
            if (line[i] == '=' && !in_str) {
                eq = i;
                break;
            }
        }
        if (eq == std::string::npos) fail_at(lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!bare_key_ok(key)) fail_at(lineno, "bad key '" + key + "'");
        if (val.empty()) fail_at(lineno, "missing value for '" + key + "'");
        if (table->contains(key)) fail_at(lineno, "duplicate key '" + key + "'");
        (*table)[key] = parse_value(val, lineno);
    }
    return root;
}

// ---- tree -> SimConfig ---------------------------------------------------

void check_keys(const json& obj, const char* where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) ok = true;
        if (!ok) fail(std::string("unknown key '") + item.key() + "' in " + where);
    }
}

double as_num(const json& v, const std::string& name) {
    if (!v.is_number()) fail("'" + name + "' must be a number");
    return v.get<double>();
}

long long as_int(const json& v, const std::string& name) {
    if (!v.is_number_integer()) fail("'" + name + "' must be an integer");
    return v.get<long long>();
}

template <class T, class Fn>
void maybe(const json& obj, const char* key, T& out, Fn&& convert) {
    if (auto it = obj.find(key); it != obj.end()) out = convert(*it);
}

void read_num(const json& obj, const char* key, double& out) {
    maybe(obj, key, out, [&](const json& v) { return as_num(v, key); });
}

void read_int(const json& obj, const char* key, int& out) {
    maybe(obj, key, out, [&](const json& v) { return static_cast<int>(as_int(v, key)); });
}

void read_seed(const json& obj, const char* key, std::uint64_t& out) {
    maybe(obj, key, out, [&](const json& v) {
        long long s = as_int(v, key);
        if (s < 0) fail(std::string("'") + key + "' must be nonnegative");
        return static_cast<std::uint64_t>(s);
    });
}

SimConfig from_tree(const json& root) {
    if (!root.is_object()) fail("config root must be a table");
    check_keys(root, "the config root",
               {"schema_version", "grid", "run", "seeds", "tolerances", "initial",
                "forcing"});
    SimConfig c;
    read_int(root, "schema_version", c.schema_version);
    if (c.schema_version != 1)
        fail("unsupported schema_version " + std::to_string(c.schema_version));

    if (auto it = root.find("grid"); it != root.end()) {
        const json& g = *it;
        check_keys(g, "[grid]", {"nx", "ny", "nz", "lx", "ly"});
        read_int(g, "nx", c.nx);
        read_int(g, "ny", c.ny);
        read_int(g, "nz", c.nz);
        read_num(g, "lx", c.lx);
        read_num(g, "ly", c.ly);
    }
    if (auto it = root.find("run"); it != root.end()) {
        const json& r = *it;
        check_keys(r, "[run]",
                   {"eps_ladder", "n_samples", "nu", "T", "dt", "p_list",
                    "snapshot_stride"});
        if (auto l = r.find("eps_ladder"); l != r.end()) {
            if (!l->is_array()) fail("'eps_ladder' must be an array");
            c.eps_ladder.clear();
            for (const json& v : *l) c.eps_ladder.push_back(as_num(v, "eps_ladder"));
        }
        read_int(r, "n_samples", c.n_samples);
        read_num(r, "nu", c.nu);
        read_num(r, "T", c.T);
        read_num(r, "dt", c.dt);
        if (auto l = r.find("p_list"); l != r.end()) {
            if (!l->is_array()) fail("'p_list' must be an array");
            c.p_list.clear();
            for (const json& v : *l)
                c.p_list.push_back(static_cast<int>(as_int(v, "p_list")));
        }
        read_int(r, "snapshot_stride", c.snapshot_stride);
    }
    if (auto it = root.find("seeds"); it != root.end()) {
        check_keys(*it, "[seeds]", {"base", "u0"});
        read_seed(*it, "base", c.base_seed);
        read_seed(*it, "u0", c.u0_seed);
    }
    if (auto it = root.find("tolerances"); it != root.end()) {
        check_keys(*it, "[tolerances]",
                   {"poisson", "helmholtz", "energy_residual", "coupling"});
        read_num(*it, "poisson", c.tol.poisson);
        read_num(*it, "helmholtz", c.tol.helmholtz);
        read_num(*it, "energy_residual", c.tol.energy_residual);
        read_num(*it, "coupling", c.tol.coupling);
    }
    if (auto it = root.find("initial"); it != root.end()) {
        check_keys(*it, "[initial]", {"u0_norm", "perturbation_scale"});
        read_num(*it, "u0_norm", c.u0_norm);
        read_num(*it, "perturbation_scale", c.perturbation_scale);
    }
    if (auto it = root.find("forcing"); it != root.end()) {
        const json& f = *it;
        check_keys(f, "[forcing]", {"f_amplitude", "modes"});
        read_num(f, "f_amplitude", c.f_amplitude);
        if (auto m = f.find("modes"); m != f.end()) {
            if (!m->is_array()) fail("'forcing.modes' must be a table array");
            c.modes.clear();
            for (const json& entry : *m) {
                if (!entry.is_object()) fail("each forcing mode must be a table");
                check_keys(entry, "[[forcing.modes]]",
                           {"kind", "a", "b", "amplitude", "path"});
                ModeSpec spec;
                if (auto k = entry.find("kind"); k != entry.end()) {
                    if (!k->is_string()) fail("mode 'kind' must be a string");
                    spec.kind = k->get<std::string>();
                }
                read_int(entry, "a", spec.a);
                read_int(entry, "b", spec.b);
                if (auto amp = entry.find("amplitude"); amp != entry.end())
                    spec.amplitude = as_num(*amp, "amplitude");
                else
                    fail("forcing mode is missing 'amplitude'");
                if (auto p = entry.find("path"); p != entry.end()) {
                    if (!p->is_string()) fail("mode 'path' must be a string");
                    spec.path = p->get<std::string>();
                }
                c.modes.push_back(std::move(spec));
            }
        }
    }
    validate(c);
    return c;
}

} // namespace

void validate(const SimConfig& c) {
    if (c.schema_version != 1) fail("unsupported schema_version");
    if (c.nx < 2 || c.ny < 2 || c.nz < 2) fail("grid sizes must be at least 2");
    if (c.lx <= 0 || c.ly <= 0) fail("domain lengths must be positive");
    if (c.eps_ladder.empty()) fail("eps_ladder must be nonempty");
    double prev = 0.5;
    for (double e : c.eps_ladder) {
        if (!(e > 0.0 && e < 0.5)) fail("eps values must lie in (0, 1/2)");
        if (!(e < prev)) fail("eps_ladder must be strictly decreasing");
        prev = e;
    }
    if (c.n_samples < 1) fail("n_samples must be at least 1");
    if (!(c.nu > 0.0)) fail("nu must be positive");
    if (!(c.T > 0.0) || !(c.dt > 0.0)) fail("T and dt must be positive");
    double steps = c.T / c.dt;
    if (std::fabs(steps - std::llround(steps)) > 1e-9 * steps || std::llround(steps) < 1)
        fail("dt must divide T");
    for (int p : c.p_list)
        if (p < 2) fail("moment orders must be at least 2");
    if (c.modes.size() > 64) fail("at most 64 forcing modes");
    for (const ModeSpec& m : c.modes) {
        if (!std::isfinite(m.amplitude)) fail("mode amplitude must be finite");
        if (m.kind == "trig") {
            if (m.a < 1 || m.b < 1) fail("trig wavenumbers must be at least 1");
        } else if (m.kind == "file") {
            if (m.path.empty()) fail("file mode needs a path");
        } else if (m.kind != "bump") {
            fail("unknown mode kind '" + m.kind + "'");
        }
    }
    if (!std::isfinite(c.f_amplitude)) fail("f_amplitude must be finite");
    if (!(c.u0_norm >= 0.0)) fail("u0_norm must be nonnegative");
    if (!(c.perturbation_scale >= 0.0)) fail("perturbation_scale must be nonnegative");
    if (!(c.tol.poisson > 0.0) || !(c.tol.helmholtz > 0.0) ||
        !(c.tol.energy_residual > 0.0) || !(c.tol.coupling > 0.0))
        fail("tolerances must be positive");
    if (c.snapshot_stride < 0) fail("snapshot_stride must be nonnegative");
}

SimConfig survey_config() {
    SimConfig c;
    c.modes = {{"trig", 1, 1, 0.50, ""},
               {"trig", 2, 1, 0.35, ""},
               {"trig", 1, 2, 0.35, ""},
               {"trig", 2, 2, 0.25, ""}};
    c.f_amplitude = 0.4;
    validate(c);
    return c;
}

SimConfig parse_config_text(const std::string& text, const std::string& format) {
    if (format == "toml") return from_tree(toml_to_json(text));
    if (format == "json") {
        json root = json::parse(text, nullptr, false);
        if (root.is_discarded()) fail("malformed json config");
        return from_tree(root);
    }
    fail("unknown config format '" + format + "'");
}

SimConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string ext;
    if (std::size_t dot = path.rfind('.'); dot != std::string::npos)
        ext = path.substr(dot + 1);
    if (ext == "toml") return parse_config_text(buf.str(), "toml");
    if (ext == "json") return parse_config_text(buf.str(), "json");
    fail("config file must end in .toml or .json, got '" + path + "'");
}

std::string config_to_json(const SimConfig& c) {
    json modes = json::array();
    for (const ModeSpec& m : c.modes) {
        json e{{"kind", m.kind}, {"amplitude", m.amplitude}};
        if (m.kind == "trig") {
            e["a"] = m.a;
            e["b"] = m.b;
        }
        if (m.kind == "file") e["path"] = m.path;
        modes.push_back(std::move(e));
    }
    json root{
        {"schema_version", c.schema_version},
        {"grid", {{"nx", c.nx}, {"ny", c.ny}, {"nz", c.nz}, {"lx", c.lx}, {"ly", c.ly}}},
        {"run",
         {{"eps_ladder", c.eps_ladder},
          {"n_samples", c.n_samples},
          {"nu", c.nu},
          {"T", c.T},
          {"dt", c.dt},
          {"p_list", c.p_list},
          {"snapshot_stride", c.snapshot_stride}}},
        {"seeds", {{"base", c.base_seed}, {"u0", c.u0_seed}}},
        {"tolerances",
         {{"poisson", c.tol.poisson},
          {"helmholtz", c.tol.helmholtz},
          {"energy_residual", c.tol.energy_residual},
          {"coupling", c.tol.coupling}}},
        {"initial",
         {{"u0_norm", c.u0_norm}, {"perturbation_scale", c.perturbation_scale}}},
        {"forcing", {{"f_amplitude", c.f_amplitude}, {"modes", std::move(modes)}}},
    };
    return root.dump(2) + "\n";
}

} // namespace thinflow
