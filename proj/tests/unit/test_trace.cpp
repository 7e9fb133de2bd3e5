#include "../support/oracles.hpp"

#include "bisched/csv.hpp"
#include "bisched/error.hpp"
#include "bisched/plot.hpp"
#include "bisched/scenario_io.hpp"
#include "bisched/simulation.hpp"
#include "bisched/trace.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bisched;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("bisched_unit_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("kmeans examples") {
    const std::vector<Eigen::VectorXd> two{Eigen::Vector2d(0, 0), Eigen::Vector2d(100, 100)};
    const KMeansResult r = kmeans(two, 2, 1);
    CHECK(r.wcss == 0.0);
    CHECK(r.labels[0] != r.labels[1]);
    CHECK(r.centroids[r.labels[0]] == two[0]);
    CHECK(r.centroids[r.labels[1]] == two[1]);

    const std::vector<Eigen::VectorXd> same(5, Eigen::Vector2d(3, -1));
    const KMeansResult s = kmeans(same, 1, 1);
    CHECK(s.centroids[0] == Eigen::Vector2d(3, -1));
    CHECK(s.wcss == 0.0);

    CHECK_THROWS_AS(kmeans(same, 2, 1), ValidationError);
    CHECK_THROWS_AS(kmeans(two, 0, 1), ValidationError);
}

TEST_CASE("kmeans separates Gaussian clusters") {
    Rng rng = make_rng(77);
    std::normal_distribution<double> g(0.0, 0.5);
    std::vector<Eigen::VectorXd> points;
    std::vector<int> truth;
    for (int k = 0; k < 100; ++k) {
        const int c = k % 2;
        points.push_back(Eigen::Vector2d(c * 10.0 + g(rng), c * 10.0 + g(rng)));
        truth.push_back(c);
    }
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const KMeansResult r = kmeans(points, 2, seed);
        int agree = 0;
        for (int k = 0; k < 100; ++k) agree += r.labels[k] == truth[k];
        CHECK(std::max(agree, 100 - agree) >= 99);
        for (std::size_t it = 1; it < r.wcss_history.size(); ++it) CHECK(r.wcss_history[it] <= r.wcss_history[it - 1]);
        CHECK(r.converged);
        const KMeansResult again = kmeans(points, 2, seed);
        CHECK(again.labels == r.labels);
    }
}

TEST_CASE("features") {
    CHECK(build_features(1.0, 1.0).isApprox(Eigen::Vector4d(0.5, 0.5, 0.5, 0.5)));
    for (double cpu : {0.01, 0.3, 2.0})
        for (double mem : {0.05, 1.0, 7.0}) {
            const Eigen::VectorXd f = build_features(cpu, mem);
            CHECK(f.norm() == doctest::Approx(1.0));
            Eigen::Vector4d raw(cpu, mem, 1.0 / cpu, 1.0 / mem);
            CHECK(f.isApprox(raw / raw.norm()));
            const Eigen::VectorXd scaled = build_features(3.0 * cpu, 3.0 * mem);
            Eigen::Vector4d raw3(3 * cpu, 3 * mem, 1.0 / (3 * cpu), 1.0 / (3 * mem));
            CHECK(scaled.isApprox(raw3 / raw3.norm()));
        }
    CHECK_THROWS_AS(build_features(0.0, 1.0), ValidationError);
    CHECK_THROWS_AS(build_features(1.0, -2.0), ValidationError);
}

TEST_CASE("reward table estimation") {
    const RewardTable one = estimate_reward_table({{0, 0, 2.0}, {1, 1, 4.0}}, 2, 2);
    CHECK(one.mean(0, 0) == doctest::Approx(0.5));
    CHECK(one.variance(0, 0) == 0.0);
    CHECK(one.mean(0, 1) == 0.0);
    CHECK(one.count(0, 1) == 0);
    CHECK(one.count(1, 1) == 1);

    Rng rng = make_rng(12);
    const double means[2] = {0.4, 0.8}, sd = 0.05;
    const int N = 400;
    std::vector<RewardSample> samples;
    for (int c = 0; c < 2; ++c) {
        std::normal_distribution<double> g(means[c], sd);
        for (int k = 0; k < N; ++k) samples.push_back({c, 0, 1.0 / g(rng)});
    }
    const RewardTable t = estimate_reward_table(samples, 2, 1);
    for (int c = 0; c < 2; ++c) {
        CHECK(std::abs(t.mean(c, 0) - means[c]) <= 3.0 * sd / std::sqrt(double(N)));
        CHECK(t.variance(c, 0) == doctest::Approx(sd * sd).epsilon(0.25));
        CHECK(t.count(c, 0) == N);
    }
}

TEST_CASE("ingestion accounts for every row") {
    std::istringstream collections(
        "collection_id,enqueue_time,instance_index,cpu_request,memory_request\n"
        "1,10,0,0.5,0.25\n"
        "1,10,1,0.5,0.25\n"
        "2,x,0,0.5,0.25\n"
        "3,20,0,0,0.25\n"
        "4,9000,0,0.5,0.25\n"
        "5,30,0,0.5\n"
        "1,10,1,0.5,0.25\n");
    std::istringstream machines(
        "machine_id,cpu_capacity,memory_capacity\n"
        "7,1,1\n"
        "7,1,1\n"
        "8,0.5,-1\n");
    std::istringstream cpi(
        "collection_id,machine_id,cpi\n"
        "1,7,1.5\n"
        "1,99,1.5\n"
        "42,7,1.5\n"
        "1,7,0\n");
    const Trace t = ingest_trace(collections, machines, cpi);
    CHECK(t.rows_read == 14);
    CHECK(t.rows_parsed() + static_cast<long>(t.rejected.size()) == t.rows_read);
    CHECK(t.instances.size() == 2);
    CHECK(t.machines.size() == 1);
    CHECK(t.cpi.size() == 1);
    for (const auto& r : t.rejected) {
        CHECK_FALSE(r.reason.empty());
        CHECK(r.line >= 2);
    }

    std::istringstream empty(""), ok_m("machine_id,cpu_capacity,memory_capacity\n"), ok_c("collection_id,machine_id,cpi\n");
    CHECK_THROWS_AS(ingest_trace(empty, ok_m, ok_c), ParseError);
    std::istringstream missing("collection_id,enqueue_time\n1,2\n"), m2("machine_id,cpu_capacity,memory_capacity\n"),
        c2("collection_id,machine_id,cpi\n");
    CHECK_THROWS_AS(ingest_trace(missing, m2, c2), ParseError);
}

TEST_CASE("synthetic trace to scenario") {
    SyntheticTraceOptions o;
    const Trace trace = generate_trace(o, 3);
    CHECK(trace.rejected.empty());

    const fs::path dir = scratch_dir("trace");
    save_trace(dir.string(), trace);
    const Trace back = load_trace(dir.string());
    CHECK(back.rejected.empty());
    CHECK(back.instances.size() == trace.instances.size());
    CHECK(back.machines.size() == trace.machines.size());
    CHECK(back.cpi.size() == trace.cpi.size());

    const TraceSummary a = export_scenario(back, IngestOptions{});
    const TraceSummary b = export_scenario(back, IngestOptions{});
    std::ostringstream sa, sb;
    write_scenario(sa, a.scenario);
    write_scenario(sb, b.scenario);
    CHECK(sa.str() == sb.str());

    const Scenario& s = a.scenario;
    CHECK(s.config.horizon == 1000);
    CHECK(s.job_count() <= 5);
    CHECK(s.server_count() == o.machine_types);
    CHECK(s.dim() == 4);
    REQUIRE(s.reward_table);
    for (int i = 0; i < s.job_count(); ++i)
        for (int j = 0; j < s.server_count(); ++j)
            if (s.reward_table->count(i, j) == 0) CHECK(s.reward_table->mean(i, j) == 0.0);
    for (std::size_t it = 1; it < a.clustering.wcss_history.size(); ++it)
        CHECK(a.clustering.wcss_history[it] <= a.clustering.wcss_history[it - 1]);
    CHECK_NOTHROW(validate(s));

    const MetricsLog log = run(s, Policy::Sabr, 100, 1);
    CHECK(log.steps.size() == 100);

    CHECK_THROWS_AS(export_scenario(Trace{}, IngestOptions{}), ValidationError);
}

TEST_CASE("csv helpers") {
    CHECK(split_csv_line("a,,b") == std::vector<std::string>{"a", "", "b"});
    double d = 0;
    long l = 0;
    CHECK(parse_double("0.25", d));
    CHECK(d == 0.25);
    CHECK_FALSE(parse_double("0.25x", d));
    CHECK_FALSE(parse_double("", d));
    CHECK(parse_long("-12", l));
    CHECK(l == -12);
    CHECK_FALSE(parse_long("1.5", l));
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678}) {
        double back = 0;
        REQUIRE(parse_double(format_number(v), back));
        CHECK(back == v);
    }
    std::istringstream crlf("a,b\r\n1,2\r\n\r\n3,4\n");
    const CsvTable t = read_csv(crlf);
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows.size() == 2);
    CHECK(t.line_numbers == std::vector<long>{2, 4});
    CHECK_THROWS_AS(t.require_column("c"), ParseError);
}

TEST_CASE("plot aggregation and rendering") {
    std::ostringstream csv;
    csv << "policy,seed,t,regret\n";
    std::vector<double> at1;
    for (int seed = 1; seed <= 10; ++seed) {
        const double v = seed * 0.5;
        at1.push_back(v);
        csv << "sabr," << seed << ",1," << v << "\n";
        csv << "sabr," << seed << ",2," << 2 * v << "\n";
    }
    std::istringstream in(csv.str());
    const std::vector<PlotSeries> series = aggregate_series(read_csv(in), "t", "regret");
    REQUIRE(series.size() == 1);
    REQUIRE(series[0].points.size() == 2);
    double mean = 0, ss = 0;
    for (double v : at1) mean += v / 10.0;
    for (double v : at1) ss += (v - mean) * (v - mean);
    const double half = 1.96 * std::sqrt(ss / 9.0) / std::sqrt(10.0);
    CHECK(series[0].points[0].mean == doctest::Approx(mean));
    CHECK(series[0].points[0].lower == doctest::Approx(mean - half));
    CHECK(series[0].points[0].upper == doctest::Approx(mean + half));
    CHECK(series[0].points[0].samples == 10);

    const std::string svg = render_svg(series, PlotStyle{"regret", "t", "regret"});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(count(svg, "class=\"mean\"") == 1);
    CHECK(count(svg, "class=\"band\"") == 1);
    CHECK(count(svg, "class=\"x-label\"") == 1);
    CHECK(count(svg, "class=\"y-label\"") == 1);

    const fs::path dir = scratch_dir("plot");
    std::ofstream(dir / "empty.csv") << "";
    CHECK_THROWS_AS(emit_plot((dir / "empty.csv").string(), (dir / "out.svg").string(), "regret"), ParseError);
    CHECK_FALSE(fs::exists(dir / "out.svg"));
    std::ofstream(dir / "header.csv") << "policy,t,regret\n";
    CHECK_THROWS_AS(emit_plot((dir / "header.csv").string(), (dir / "out.svg").string(), "regret"), ParseError);
    CHECK_FALSE(fs::exists(dir / "out.svg"));
    std::ofstream(dir / "good.csv") << csv.str();
    emit_plot((dir / "good.csv").string(), (dir / "out.svg").string(), "regret");
    CHECK(count(slurp(dir / "out.svg"), "class=\"mean\"") == 1);
}
