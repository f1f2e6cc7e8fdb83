#include "pdmp/model.hpp"

#include <cerrno>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace pdmp {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }
std::string join(const std::string& path, std::size_t index) {
    return path + "/" + std::to_string(index);
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw ModelError("field " + path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw ModelError("field " + join(path, key) + ": missing");
    return *it;
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ModelError("field " + path + ": expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& path) {
    auto it = obj.find(key);
    return it == obj.end() ? fallback : number(*it, join(path, key));
}

std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw ModelError("field " + path + ": expected an array");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], join(path, k)));
    return out;
}

Vector vector_of(const json& v, std::size_t size, const std::string& path) {
    const auto values = numbers(v, path);
    if (values.size() != size)
        throw ModelError("dimension mismatch in " + path + ": expected " + std::to_string(size) +
                         " entries, got " + std::to_string(values.size()));
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(size));
}

Matrix matrix_of(const json& v, std::size_t rows, std::size_t cols, const std::string& path) {
    if (!v.is_array() || v.size() != rows)
        throw ModelError("dimension mismatch in " + path + ": expected " + std::to_string(rows) +
                         " rows, got " + (v.is_array() ? std::to_string(v.size()) : "non-array"));
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) m.row(r) = vector_of(v[r], cols, join(path, r));
    return m;
}

std::vector<std::vector<int>> feasible_sets(const json& section, const std::string& key,
                                            std::size_t count, std::size_t actions,
                                            const std::string& path) {
    std::vector<std::vector<int>> sets;
    auto it = section.find(key);
    if (it == section.end()) {
        std::vector<int> all(actions);
        for (std::size_t a = 0; a < actions; ++a) all[a] = static_cast<int>(a);
        return std::vector<std::vector<int>>(count, all);
    }
    const std::string p = join(path, key);
    if (!it->is_array() || it->size() != count)
        throw ModelError("dimension mismatch in " + p + ": expected " + std::to_string(count) +
                         " feasible sets");
    for (std::size_t k = 0; k < count; ++k) {
        const auto& s = (*it)[k];
        if (!s.is_array()) throw ModelError("field " + join(p, k) + ": expected an array");
        std::vector<int> set;
        for (std::size_t q = 0; q < s.size(); ++q) {
            if (!s[q].is_number_integer())
                throw ModelError("field " + join(join(p, k), q) + ": expected an action index");
            set.push_back(s[q].get<int>());
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

json to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
    return rows;
}

}  // namespace

std::string Violation::describe() const {
    std::ostringstream os;
    os << invariant << " fails at " << location << " (magnitude " << magnitude << ")";
    return os.str();
}

ValidationError::ValidationError(std::vector<Violation> violations)
    : ModelError([&] {
          std::string msg = "model violates " + std::to_string(violations.size()) + " invariant(s)";
          if (!violations.empty()) msg += ": " + violations.front().describe();
          return msg;
      }()),
      violations_(std::move(violations)) {}

PdmpModel parse_model(const json& doc) {
    PdmpModel m;
    const std::string root;
    const auto schema = field(doc, "schema", root);
    if (!schema.is_string() || schema.get<std::string>() != kModelSchema)
        throw ModelError("field /schema: expected \"" + std::string(kModelSchema) + "\"");
    m.name = doc.value("name", std::string{});

    const auto& grid = field(doc, "grid", root);
    m.grid.points = numbers(field(grid, "points", "/grid"), "/grid/points");
    if (auto it = grid.find("boundary_points"); it != grid.end())
        m.grid.boundary_points = numbers(*it, "/grid/boundary_points");
    const std::size_t n = m.grid.interior_size();
    const std::size_t nb = m.grid.boundary_size();
    const std::size_t nodes = m.grid.node_count();
    if (n == 0) throw ModelError("field /grid/points: at least one interior point is required");

    const auto& actions = field(doc, "actions", root);
    m.actions.values = numbers(field(actions, "values", "/actions"), "/actions/values");
    const std::size_t na = m.actions.size();
    if (na == 0) throw ModelError("field /actions/values: at least one action is required");
    m.actions.feasible = feasible_sets(actions, "feasible", n, na, "/actions");
    m.actions.feasible_boundary = feasible_sets(actions, "feasible_boundary", nb, na, "/actions");

    const auto& flow = field(doc, "flow", root);
    const auto& kind = field(flow, "kind", "/flow");
    if (!kind.is_string() || !flow_kind_from_string(kind.get<std::string>()))
        throw ModelError("field /flow/kind: expected trivial, affine1d or tabulated1d");
    m.flow_spec.kind = *flow_kind_from_string(kind.get<std::string>());
    m.flow_spec.alpha0 = number_or(flow, "alpha0", 0.0, "/flow");
    m.flow_spec.alpha1 = number_or(flow, "alpha1", 0.0, "/flow");
    if (m.flow_spec.kind == FlowKind::tabulated1d) {
        m.flow_spec.velocity = numbers(field(flow, "velocity", "/flow"), "/flow/velocity");
        if (auto it = flow.find("velocity_points"); it != flow.end()) {
            m.flow_spec.velocity_points = numbers(*it, "/flow/velocity_points");
        } else {
            for (std::size_t k = 0; k < nodes; ++k) m.flow_spec.velocity_points.push_back(m.grid.node(k));
        }
        if (m.flow_spec.velocity.size() != m.flow_spec.velocity_points.size())
            throw ModelError("dimension mismatch in /flow/velocity: expected " +
                             std::to_string(m.flow_spec.velocity_points.size()) + " entries, got " +
                             std::to_string(m.flow_spec.velocity.size()));
    }
    if (auto it = flow.find("domain"); it != flow.end()) {
        const auto d = numbers(*it, "/flow/domain");
        if (d.size() != 2) throw ModelError("dimension mismatch in /flow/domain: expected [lo, hi]");
        m.flow_spec.domain_lo = d[0];
        m.flow_spec.domain_hi = d[1];
    }

    const auto& constants = field(doc, "constants", root);
    auto& k = m.constants;
    k.b = number(field(constants, "b", "/constants"), "/constants/b");
    k.c = number(field(constants, "c", "/constants"), "/constants/c");
    k.delta = number(field(constants, "delta", "/constants"), "/constants/delta");
    k.M = number(field(constants, "M", "/constants"), "/constants/M");
    k.K_lambda = number(field(constants, "K_lambda", "/constants"), "/constants/K_lambda");
    k.k_g = number(field(constants, "k_g", "/constants"), "/constants/k_g");
    k.K_g = number(field(constants, "K_g", "/constants"), "/constants/K_g");
    m.flow_spec.t_max = number_or(flow, "t_max", 0.0, "/flow");
    if (m.flow_spec.t_max <= 0.0 && k.c > 0.0) m.flow_spec.t_max = 50.0 / k.c;

    const auto& rates = field(doc, "rates", root);
    m.jump_rate = matrix_of(field(rates, "lambda", "/rates"), nodes, na, "/rates/lambda");
    if (auto it = rates.find("lambda_floor"); it != rates.end())
        m.rate_floor = vector_of(*it, nodes, "/rates/lambda_floor");
    else
        m.rate_floor = Vector::Zero(static_cast<Eigen::Index>(nodes));

    const auto& kernel = field(field(doc, "kernel", root), "Q", "/kernel");
    if (!kernel.is_array() || kernel.size() != nodes)
        throw ModelError("dimension mismatch in /kernel/Q: expected " + std::to_string(nodes) + " rows");
    m.kernel.assign(na, Matrix(nodes, n));
    for (std::size_t x = 0; x < nodes; ++x) {
        const std::string px = join("/kernel/Q", x);
        if (!kernel[x].is_array() || kernel[x].size() != na)
            throw ModelError("dimension mismatch in " + px + ": expected " + std::to_string(na) +
                             " action rows");
        for (std::size_t a = 0; a < na; ++a)
            m.kernel[a].row(x) = vector_of(kernel[x][a], n, join(px, a)).transpose();
    }

    const auto& costs = field(doc, "costs", root);
    m.running_cost = matrix_of(field(costs, "running", "/costs"), nodes, na, "/costs/running");
    if (auto it = costs.find("boundary"); it != costs.end())
        m.boundary_cost = matrix_of(*it, nb, na, "/costs/boundary");
    else if (nb == 0)
        m.boundary_cost = Matrix(0, na);
    else
        throw ModelError("field /costs/boundary: missing");

    const auto& lyap = field(doc, "lyapunov", root);
    m.lyapunov_g = vector_of(field(lyap, "g", "/lyapunov"), nodes, "/lyapunov/g");
    if (auto it = lyap.find("rbar"); it != lyap.end())
        m.lyapunov_rbar = vector_of(*it, nb, "/lyapunov/rbar");
    else
        m.lyapunov_rbar = Vector::Zero(static_cast<Eigen::Index>(nb));
    return m;
}

PdmpModel parse_model_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw ModelError("parse error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + e.what());
    }
    return parse_model(doc);
}

PdmpModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::system_error(errno, std::generic_category(), "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    auto model = parse_model_text(buf.str());
    if (model.name.empty()) model.name = path.stem().string();
    return model;
}

PdmpModel load_model(const std::filesystem::path& path) {
    auto model = read_model(path);
    if (auto v = validate_model(model); !v.empty()) throw ValidationError(std::move(v));
    return model;
}

json model_to_json(const PdmpModel& m) {
    json doc;
    doc["schema"] = kModelSchema;
    doc["name"] = m.name;
    doc["grid"] = {{"points", m.grid.points}, {"boundary_points", m.grid.boundary_points}};
    doc["actions"] = {{"values", m.actions.values},
                      {"feasible", m.actions.feasible},
                      {"feasible_boundary", m.actions.feasible_boundary}};
    json flow = {{"kind", to_string(m.flow_spec.kind)},
                 {"alpha0", m.flow_spec.alpha0},
                 {"alpha1", m.flow_spec.alpha1},
                 {"t_max", m.flow_spec.t_max}};
    if (m.flow_spec.kind == FlowKind::tabulated1d) {
        flow["velocity"] = m.flow_spec.velocity;
        flow["velocity_points"] = m.flow_spec.velocity_points;
    }
    if (std::isfinite(m.flow_spec.domain_lo) && std::isfinite(m.flow_spec.domain_hi))
        flow["domain"] = {m.flow_spec.domain_lo, m.flow_spec.domain_hi};
    doc["flow"] = flow;
    doc["rates"] = {{"lambda", to_json(m.jump_rate)}, {"lambda_floor", to_json(m.rate_floor)}};
    json q = json::array();
    for (std::size_t x = 0; x < m.grid.node_count(); ++x) {
        json per_action = json::array();
        for (const auto& k : m.kernel) per_action.push_back(to_json(Vector(k.row(x).transpose())));
        q.push_back(per_action);
    }
    doc["kernel"] = {{"Q", q}};
    doc["costs"] = {{"running", to_json(m.running_cost)}, {"boundary", to_json(m.boundary_cost)}};
    doc["lyapunov"] = {{"g", to_json(m.lyapunov_g)}, {"rbar", to_json(m.lyapunov_rbar)}};
    const auto& k = m.constants;
    doc["constants"] = {{"b", k.b},     {"c", k.c},     {"delta", k.delta}, {"M", k.M},
                        {"K_lambda", k.K_lambda}, {"k_g", k.k_g}, {"K_g", k.K_g}};
    return doc;
}

std::vector<Violation> validate_model(const PdmpModel& m) {
    std::vector<Violation> out;
    auto add = [&](std::string inv, std::string loc, double mag) {
        out.push_back({std::move(inv), std::move(loc), mag});
    };
    const std::size_t n = m.grid.interior_size();
    const std::size_t nb = m.grid.boundary_size();
    const std::size_t nodes = m.grid.node_count();
    const std::size_t na = m.action_count();
    auto node_name = [&](std::size_t k) {
        std::ostringstream os;
        if (k < n)
            os << "x" << k << "=" << m.grid.points[k];
        else
            os << "z" << (k - n) << "=" << m.grid.boundary_points[k - n];
        return os.str();
    };
    auto pair_name = [&](std::size_t k, std::size_t a) { return node_name(k) + ", a" + std::to_string(a); };

    for (std::size_t k = 0; k < nodes; ++k)
        if (!std::isfinite(m.grid.node(k))) add("grid coordinates finite", node_name(k), 0.0);
    for (std::size_t k = 1; k < n; ++k)
        if (!(m.grid.points[k] > m.grid.points[k - 1]))
            add("grid points strictly increasing", node_name(k), m.grid.points[k - 1] - m.grid.points[k]);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t k = 0; k < nodes; ++k)
            if (k != n + b && m.grid.node(k) == m.grid.boundary_points[b])
                add("grid and boundary points distinct", node_name(n + b), 0.0);

    auto check_sets = [&](const std::vector<std::vector<int>>& sets, std::size_t offset) {
        for (std::size_t k = 0; k < sets.size(); ++k) {
            if (sets[k].empty()) add("feasible action set non-empty", node_name(offset + k), 0.0);
            for (int a : sets[k])
                if (a < 0 || static_cast<std::size_t>(a) >= na)
                    add("feasible action index in range", node_name(offset + k), a);
        }
    };
    check_sets(m.actions.feasible, 0);
    check_sets(m.actions.feasible_boundary, n);

    for (std::size_t a = 0; a < na; ++a) {
        for (std::size_t k = 0; k < nodes; ++k) {
            const auto row = m.kernel[a].row(k);
            if (!row.allFinite() || row.minCoeff() < 0.0)
                add("kernel entries non-negative", pair_name(k, a), row.minCoeff());
            const double sum = row.sum();
            if (!(std::abs(sum - 1.0) <= 1e-12)) add("kernel row sums to 1", pair_name(k, a), sum - 1.0);
        }
    }

    auto nonneg_table = [&](const Matrix& t, const std::string& what, std::size_t offset) {
        for (Eigen::Index k = 0; k < t.rows(); ++k)
            for (Eigen::Index a = 0; a < t.cols(); ++a)
                if (!std::isfinite(t(k, a)) || t(k, a) < 0.0)
                    add(what + " finite and non-negative", pair_name(offset + k, a), t(k, a));
    };
    nonneg_table(m.jump_rate, "jump rate", 0);
    nonneg_table(m.running_cost, "running cost", 0);
    nonneg_table(m.boundary_cost, "boundary cost", n);
    for (std::size_t k = 0; k < nodes; ++k) {
        if (!std::isfinite(m.rate_floor(k)) || m.rate_floor(k) < 0.0)
            add("rate floor finite and non-negative", node_name(k), m.rate_floor(k));
        if (!std::isfinite(m.lyapunov_g(k)) || m.lyapunov_g(k) < 1.0)
            add("g >= 1", node_name(k), m.lyapunov_g(k));
    }
    for (std::size_t b = 0; b < nb; ++b)
        if (!std::isfinite(m.lyapunov_rbar(b)) || m.lyapunov_rbar(b) < 0.0)
            add("rbar finite and non-negative", node_name(n + b), m.lyapunov_rbar(b));

    auto check_floor = [&](std::size_t k, const std::vector<int>& set) {
        for (int a : set) {
            if (a < 0 || static_cast<std::size_t>(a) >= na) continue;
            const double gap = m.jump_rate(k, a) - m.rate_floor(k);
            if (gap < 0.0) add("jump rate >= rate floor", pair_name(k, a), gap);
        }
    };
    for (std::size_t k = 0; k < n && k < m.actions.feasible.size(); ++k) check_floor(k, m.actions.feasible[k]);
    for (std::size_t b = 0; b < nb && b < m.actions.feasible_boundary.size(); ++b)
        check_floor(n + b, m.actions.feasible_boundary[b]);

    const auto& k = m.constants;
    if (!(k.c > 0.0)) add("constant c > 0", "constants", k.c);
    if (!(k.delta > 0.0)) add("constant delta > 0", "constants", k.delta);
    if (!(k.b >= 0.0)) add("constant b >= 0", "constants", k.b);
    if (!(k.M >= 0.0)) add("constant M >= 0", "constants", k.M);
    if (!(k.K_lambda >= 0.0)) add("constant K_lambda >= 0", "constants", k.K_lambda);
    if (!(k.k_g > 0.0 && k.k_g < 1.0)) add("constant k_g in (0,1)", "constants", k.k_g);
    if (!(k.K_g >= 0.0)) add("constant K_g >= 0", "constants", k.K_g);
    if (!(m.flow_spec.t_max > 0.0) || !std::isfinite(m.flow_spec.t_max))
        add("truncation horizon t_max > 0", "flow", m.flow_spec.t_max);

    if (m.flow_spec.kind == FlowKind::tabulated1d)
        for (std::size_t q = 0; q < m.flow_spec.velocity.size(); ++q)
            if (!std::isfinite(m.flow_spec.velocity[q]))
                add("flow velocity finite", "velocity sample " + std::to_string(q), 0.0);
    if (out.empty()) {
        const Flow flow = m.flow();
        for (std::size_t x = 0; x < n; ++x) {
            const double te = flow.escape_time(m.grid.points[x]);
            if (std::isfinite(te)) add("flow stays in the domain", node_name(x), te);
        }
    }
    return out;
}

}  // namespace pdmp
