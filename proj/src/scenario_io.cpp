#include "bisched/scenario_io.hpp"

#include "bisched/error.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace bisched {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    double v = 0.0;
    std::string rest;
    if (!(in >> v) || (in >> rest)) throw ParseError("scenario: '" + key + "' expects a number, got '" + text + "'");
    return v;
}

long parse_long(const std::string& key, const std::string& text) {
    long v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) throw ParseError("scenario: '" + key + "' expects an integer, got '" + text + "'");
    return v;
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    std::vector<double> out;
    std::string token;
    while (in >> token) out.push_back(parse_double(key, token));
    return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

struct ClassKey {
    std::size_t index;
    std::string field;
};

ClassKey split_class_key(const std::string& key, const std::string& prefix) {
    const std::string rest = key.substr(prefix.size());
    const auto dot = rest.find('.');
    if (dot == std::string::npos) throw ParseError("scenario: malformed key '" + key + "'");
    const long index = parse_long(key, rest.substr(0, dot));
    if (index < 0 || index > 100000) throw ParseError("scenario: class index out of range in '" + key + "'");
    return {static_cast<std::size_t>(index), rest.substr(dot + 1)};
}

template <class T>
T& grow(std::vector<T>& v, std::size_t index, std::vector<bool>& seen) {
    if (v.size() <= index) {
        v.resize(index + 1);
        seen.resize(index + 1, false);
    }
    seen[index] = true;
    return v[index];
}

Eigen::MatrixXd row_major(const std::string& key, const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        throw ParseError("scenario: '" + key + "' needs " + std::to_string(rows * cols) + " values");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[r * cols + c];
    return m;
}

}  // namespace

Scenario read_scenario(std::istream& in) {
    Scenario s;
    std::vector<bool> job_seen, server_seen;
    std::map<std::string, std::string> deferred; // matrices whose shape depends on class counts
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("scenario line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);

        if (key == "name") {
            s.name = value;
        } else if (key == "bound") {
            s.bound = parse_double(key, value);
        } else if (key == "theta" || key.rfind("reward_table.", 0) == 0 || key == "capacity_schedule") {
            deferred[key] = value;
        } else if (key == "noise.kind") {
            if (value == "gaussian") s.noise.kind = NoiseKind::Gaussian;
            else if (value == "uniform") s.noise.kind = NoiseKind::Uniform;
            else throw ParseError("scenario: unknown noise kind '" + value + "'");
        } else if (key == "noise.scale") {
            s.noise.scale = parse_double(key, value);
        } else if (key.rfind("job.", 0) == 0) {
            const auto [index, field] = split_class_key(key, "job.");
            JobClass& job = grow(s.jobs, index, job_seen);
            if (field == "feature") job.feature = to_vector(parse_list(key, value));
            else if (field == "arrival_rate") job.arrival_rate = parse_double(key, value);
            else if (field == "service_rate") job.service_rate = parse_double(key, value);
            else if (field == "weight") job.weight = parse_double(key, value);
            else if (field == "holding_cost") job.holding_cost = parse_double(key, value);
            else throw ParseError("scenario: unknown key '" + key + "'");
        } else if (key.rfind("server.", 0) == 0) {
            const auto [index, field] = split_class_key(key, "server.");
            ServerClass& server = grow(s.servers, index, server_seen);
            if (field == "feature") server.feature = to_vector(parse_list(key, value));
            else if (field == "capacity") server.capacity = static_cast<int>(parse_long(key, value));
            else throw ParseError("scenario: unknown key '" + key + "'");
        } else if (key == "config.V") {
            s.config.V = parse_double(key, value);
        } else if (key == "config.gamma") {
            s.config.gamma = parse_double(key, value);
        } else if (key == "config.zeta") {
            s.config.zeta = parse_double(key, value);
        } else if (key == "config.horizon") {
            s.config.horizon = parse_long(key, value);
        } else if (key == "config.seed") {
            const long seed = parse_long(key, value);
            if (seed < 0) throw ParseError("scenario: seed must be nonnegative");
            s.config.seed = static_cast<std::uint64_t>(seed);
        } else if (key == "config.switch_threshold") {
            s.config.switch_threshold = parse_double(key, value);
        } else if (key == "config.kappa") {
            s.config.kappa = parse_double(key, value);
        } else if (key == "config.policy") {
            try {
                s.config.policy = parse_policy(value);
            } catch (const Error& e) {
                throw ParseError(std::string("scenario: ") + e.what());
            }
        } else {
            throw ParseError("scenario line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }

    for (std::size_t i = 0; i < job_seen.size(); ++i)
        if (!job_seen[i]) throw ParseError("scenario: job class ids must be contiguous (missing job." + std::to_string(i) + ")");
    for (std::size_t j = 0; j < server_seen.size(); ++j)
        if (!server_seen[j])
            throw ParseError("scenario: server class ids must be contiguous (missing server." + std::to_string(j) + ")");
    if (s.jobs.empty() || s.servers.empty()) throw ParseError("scenario: needs at least one job and one server class");

    const Eigen::Index d = s.jobs.front().feature.size();
    if (auto it = deferred.find("theta"); it != deferred.end()) {
        const auto v = parse_list("theta", it->second);
        Eigen::Index dim = 0;
        while (dim * dim < static_cast<Eigen::Index>(v.size())) ++dim;
        s.theta = row_major("theta", v, dim, dim);
    } else {
        s.theta = Eigen::MatrixXd::Zero(d, d);
    }

    const Eigen::Index I = s.job_count();
    const Eigen::Index J = s.server_count();
    if (deferred.count("reward_table.mean")) {
        RewardTable table;
        table.mean = row_major("reward_table.mean", parse_list("reward_table.mean", deferred["reward_table.mean"]), I, J);
        table.variance = deferred.count("reward_table.variance")
                             ? row_major("reward_table.variance",
                                         parse_list("reward_table.variance", deferred["reward_table.variance"]), I, J)
                             : Eigen::MatrixXd::Zero(I, J);
        if (deferred.count("reward_table.count"))
            table.count = row_major("reward_table.count", parse_list("reward_table.count", deferred["reward_table.count"]),
                                    I, J)
                              .cast<int>();
        else
            table.count = Eigen::MatrixXi::Zero(I, J);
        s.reward_table = std::move(table);
    } else if (deferred.count("reward_table.variance") || deferred.count("reward_table.count")) {
        throw ParseError("scenario: reward_table.mean is required when a reward table is given");
    }

    if (auto it = deferred.find("capacity_schedule"); it != deferred.end()) {
        std::istringstream rows(it->second);
        std::string row;
        while (std::getline(rows, row, ';')) {
            if (trim(row).empty()) continue;
            std::vector<int> caps;
            for (double v : parse_list("capacity_schedule", row)) {
                if (v != static_cast<int>(v)) throw ParseError("scenario: capacity_schedule entries must be integers");
                caps.push_back(static_cast<int>(v));
            }
            s.schedule.rows.push_back(std::move(caps));
        }
    }
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file '" + path + "'");
    Scenario s = read_scenario(in);
    return s;
}

namespace {

void write_list(std::ostream& out, const Eigen::VectorXd& v) {
    for (Eigen::Index k = 0; k < v.size(); ++k) out << (k ? " " : "") << v[k];
}

template <class M>
void write_matrix(std::ostream& out, const M& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << (r || c ? " " : "") << m(r, c);
}

}  // namespace

void write_scenario(std::ostream& out, const Scenario& s) {
    const auto old_precision = out.precision(std::numeric_limits<double>::max_digits10);
    out << "name = " << s.name << '\n';
    out << "bound = " << s.bound << '\n';
    out << "theta = ";
    write_matrix(out, s.theta);
    out << '\n';
    out << "noise.kind = " << (s.noise.kind == NoiseKind::Gaussian ? "gaussian" : "uniform") << '\n';
    out << "noise.scale = " << s.noise.scale << '\n';
    for (std::size_t i = 0; i < s.jobs.size(); ++i) {
        const JobClass& job = s.jobs[i];
        const std::string p = "job." + std::to_string(i) + ".";
        out << p << "feature = ";
        write_list(out, job.feature);
        out << '\n';
        out << p << "arrival_rate = " << job.arrival_rate << '\n';
        out << p << "service_rate = " << job.service_rate << '\n';
        out << p << "weight = " << job.weight << '\n';
        out << p << "holding_cost = " << job.holding_cost << '\n';
    }
    for (std::size_t j = 0; j < s.servers.size(); ++j) {
        const std::string p = "server." + std::to_string(j) + ".";
        out << p << "feature = ";
        write_list(out, s.servers[j].feature);
        out << '\n';
        out << p << "capacity = " << s.servers[j].capacity << '\n';
    }
    if (s.reward_table) {
        out << "reward_table.mean = ";
        write_matrix(out, s.reward_table->mean);
        out << "\nreward_table.variance = ";
        write_matrix(out, s.reward_table->variance);
        out << "\nreward_table.count = ";
        write_matrix(out, s.reward_table->count);
        out << '\n';
    }
    if (!s.schedule.empty()) {
        out << "capacity_schedule = ";
        for (std::size_t r = 0; r < s.schedule.rows.size(); ++r) {
            if (r) out << "; ";
            for (std::size_t j = 0; j < s.schedule.rows[r].size(); ++j) out << (j ? " " : "") << s.schedule.rows[r][j];
        }
        out << '\n';
    }
    const SystemConfig& c = s.config;
    if (c.V) out << "config.V = " << *c.V << '\n';
    out << "config.gamma = " << c.gamma << '\n';
    if (c.zeta) out << "config.zeta = " << *c.zeta << '\n';
    out << "config.horizon = " << c.horizon << '\n';
    out << "config.seed = " << c.seed << '\n';
    out << "config.switch_threshold = " << c.switch_threshold << '\n';
    if (c.kappa) out << "config.kappa = " << *c.kappa << '\n';
    out << "config.policy = " << to_string(c.policy) << '\n';
    out.precision(old_precision);
}

void save_scenario(const std::string& path, const Scenario& s) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write scenario file '" + path + "'");
    write_scenario(out, s);
    if (!out) throw Error("failed writing scenario file '" + path + "'");
}

}  // namespace bisched
