#include "bisched/problem_io.hpp"

#include "bisched/csv.hpp"
#include "bisched/error.hpp"

#include <cmath>
#include <map>
#include <ostream>

namespace bisched {

namespace {

class PairTable {
public:
    PairTable(std::istream& in, const std::vector<std::string>& required, const std::vector<std::string>& optional = {})
        : table_(read_csv(in)) {
        for (const auto& c : required) index_[c] = table_.require_column(c);
        for (const auto& c : optional)
            if (table_.column(c) >= 0) index_[c] = table_.column(c);
        for (std::size_t r = 0; r < table_.rows.size(); ++r) {
            if (table_.rows[r].size() != table_.header.size()) fail(r, "wrong number of fields");
            const long i = id(r, "i"), j = id(r, "j");
            classes_ = std::max(classes_, static_cast<int>(i) + 1);
            servers_ = std::max(servers_, static_cast<int>(j) + 1);
            if (!seen_.emplace(std::make_pair(i, j), r).second) fail(r, "duplicate pair");
        }
        if (table_.rows.empty()) throw ParseError("problem table has no rows");
    }

    int classes() const { return classes_; }
    int servers() const { return servers_; }
    bool has(const std::string& c) const { return index_.count(c) > 0; }
    std::size_t rows() const { return table_.rows.size(); }

    void require_complete() const {
        if (seen_.size() != static_cast<std::size_t>(classes_) * static_cast<std::size_t>(servers_))
            throw ParseError("problem table must list every (i, j) pair");
    }

    long id(std::size_t r, const std::string& c) const {
        long v = 0;
        if (!parse_long(table_.rows[r][index_.at(c)], v) || v < 0) fail(r, "bad " + c);
        return v;
    }

    double number(std::size_t r, const std::string& c) const {
        double v = 0.0;
        if (!parse_double(table_.rows[r][index_.at(c)], v) || !std::isfinite(v)) fail(r, "bad " + c);
        return v;
    }

    // Fills `out[key(r)]` with column c, requiring repeated values to agree.
    void gather(const std::string& c, const char* key, Eigen::VectorXd& out) const {
        std::vector<bool> set(out.size(), false);
        for (std::size_t r = 0; r < rows(); ++r) {
            const long k = id(r, key);
            const double v = number(r, c);
            if (set[k] && out[k] != v) fail(r, "inconsistent " + c);
            out[k] = v;
            set[k] = true;
        }
    }

    double scalar(const std::string& c) const {
        const double v = number(0, c);
        for (std::size_t r = 1; r < rows(); ++r)
            if (number(r, c) != v) fail(r, "inconsistent " + c);
        return v;
    }

    [[noreturn]] void fail(std::size_t r, const std::string& what) const {
        throw ParseError("line " + std::to_string(table_.line_numbers[r]) + ": " + what);
    }

private:
    CsvTable table_;
    std::map<std::string, int> index_;
    std::map<std::pair<long, long>, std::size_t> seen_;
    int classes_ = 0;
    int servers_ = 0;
};

}  // namespace

AllocationProblem read_allocation_problem(std::istream& in) {
    const PairTable t(in, {"i", "j", "rhat", "Q", "w", "n", "gamma", "V"}, {"bound"});
    t.require_complete();
    AllocationProblem p;
    p.estimates.resize(t.classes(), t.servers());
    for (std::size_t r = 0; r < t.rows(); ++r) p.estimates(t.id(r, "i"), t.id(r, "j")) = t.number(r, "rhat");
    p.queues.resize(t.classes());
    p.weights.resize(t.classes());
    p.capacities.resize(t.servers());
    t.gather("Q", "i", p.queues);
    t.gather("w", "i", p.weights);
    t.gather("n", "j", p.capacities);
    p.gamma = t.scalar("gamma");
    p.V = t.scalar("V");
    if (t.has("bound")) p.bound = t.scalar("bound");
    return p;
}

void write_allocation(std::ostream& out, const Allocation& a) {
    write_csv_row(out, {"i", "j", "y", "Y", "q", "h", "objective", "kkt_residual"});
    const Eigen::VectorXd Y = a.row_sums();
    for (Eigen::Index i = 0; i < a.y.rows(); ++i)
        for (Eigen::Index j = 0; j < a.y.cols(); ++j)
            write_csv_row(out, {std::to_string(i), std::to_string(j), format_number(a.y(i, j)), format_number(Y[i]),
                                format_number(a.q[j]), format_number(a.h(i, j)), format_number(a.objective),
                                format_number(a.kkt_residual)});
}

OracleProblem read_oracle_problem(std::istream& in) {
    const PairTable t(in, {"i", "j", "r", "rho", "n"});
    t.require_complete();
    OracleProblem p;
    p.rewards.resize(t.classes(), t.servers());
    for (std::size_t r = 0; r < t.rows(); ++r) p.rewards(t.id(r, "i"), t.id(r, "j")) = t.number(r, "r");
    p.traffic.resize(t.classes());
    p.capacities.resize(t.servers());
    t.gather("rho", "i", p.traffic);
    t.gather("n", "j", p.capacities);
    return p;
}

void write_oracle_solution(std::ostream& out, const OracleSolution& s) {
    write_csv_row(out, {"i", "j", "p", "value"});
    for (Eigen::Index i = 0; i < s.p.rows(); ++i)
        for (Eigen::Index j = 0; j < s.p.cols(); ++j)
            write_csv_row(out, {std::to_string(i), std::to_string(j), format_number(s.p(i, j)), format_number(s.value)});
}

void read_delays(std::istream& in, int classes, int servers, Eigen::MatrixXi& forward, Eigen::MatrixXi& backward) {
    const PairTable t(in, {"i", "j", "forward", "backward"});
    if (t.classes() > classes || t.servers() > servers) throw ParseError("delay table refers to a pair outside the problem");
    forward = Eigen::MatrixXi::Zero(classes, servers);
    backward = Eigen::MatrixXi::Zero(classes, servers);
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const long f = t.id(r, "forward"), b = t.id(r, "backward");
        forward(t.id(r, "i"), t.id(r, "j")) = static_cast<int>(f);
        backward(t.id(r, "i"), t.id(r, "j")) = static_cast<int>(b);
    }
}

}  // namespace bisched
