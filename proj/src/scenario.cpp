#include "noir/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace noir {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& context, const std::string& what) {
    throw ParseError(context.empty() ? what : context + ": " + what);
}

double get_number(const ordered_json& j, const char* key, double fallback,
                  const std::string& ctx) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) fail(ctx, std::string("field '") + key +
                                           "' must be a number");
    return j[key].get<double>();
}

} // namespace

Scenario scenario_from_json(const std::string& text,
                            const std::string& context) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(context, e.what());
    }
    if (!j.is_object()) fail(context, "top level must be an object");
    for (const char* key : {"roads", "edges"})
        if (!j.contains(key))
            fail(context, std::string("missing field '") + key + "'");

    Scenario s;
    s.name = j.value("name", std::string("scenario"));

    std::vector<int> roads;
    try {
        roads = j["roads"].get<std::vector<int>>();
    } catch (const nlohmann::json::exception&) {
        fail(context, "'roads' must be an array of integers");
    }
    std::vector<std::pair<int, int>> edges;
    for (const auto& e : j["edges"]) {
        if (!e.is_array() || e.size() != 2)
            fail(context, "'edges' entries must be [from, to] pairs");
        edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
    s.network = build_network(roads, edges);

    std::map<int, std::vector<int>> junction_roads;
    if (j.contains("junctions")) {
        for (const auto& junction : j["junctions"]) {
            if (!junction.contains("id") || !junction.contains("roads"))
                fail(context, "'junctions' entries need 'id' and 'roads'");
            junction_roads[junction["id"].get<int>()] =
                junction["roads"].get<std::vector<int>>();
        }
    }
    if (!j.contains("phases")) fail(context, "missing field 'phases'");
    for (const auto& entry : j["phases"]) {
        if (!entry.contains("junction") || !entry.contains("cycle"))
            fail(context, "'phases' entries need 'junction' and 'cycle'");
        JunctionSpec spec;
        spec.id = entry["junction"].get<int>();
        auto it = junction_roads.find(spec.id);
        if (it == junction_roads.end())
            fail(context, "phases reference undeclared junction " +
                              std::to_string(spec.id));
        spec.roads = it->second;
        for (const auto& phase : entry["cycle"]) {
            MovementPhase mp;
            mp.junction_id = spec.id;
            for (const auto& e : phase) {
                if (!e.is_array() || e.size() != 2)
                    fail(context, "phase edges must be [from, to] pairs");
                mp.edge_subset.emplace_back(e[0].get<int>(), e[1].get<int>());
            }
            spec.cycle.push_back(std::move(mp));
        }
        if (entry.contains("r") &&
            entry["r"].get<std::size_t>() != spec.cycle.size())
            fail(context, "junction " + std::to_string(spec.id) +
                              " declares r = " + entry["r"].dump() + " but " +
                              std::to_string(spec.cycle.size()) +
                              " phases are listed");
        s.junctions.push_back(std::move(spec));
    }
    s.schedule = build_phase_schedule(s.network, s.junctions);

    if (j.contains("fd")) {
        const auto& fd = j["fd"];
        s.fd.z_max = get_number(fd, "z_max", s.fd.z_max, context);
        s.fd.rho_min = get_number(fd, "rho_min", s.fd.rho_min, context);
        s.fd.rho_mid = get_number(fd, "rho_mid", s.fd.rho_mid, context);
        s.fd.rho_max = get_number(fd, "rho_max", s.fd.rho_max, context);
    }
    s.fd.validate();

    if (j.contains("p_table")) {
        const auto& p = j["p_table"];
        s.p_table.on = get_number(p, "on", s.p_table.on, context);
        s.p_table.off = get_number(p, "off", s.p_table.off, context);
        s.p_table.outlet = get_number(p, "outlet", s.p_table.outlet, context);
        for (const auto& o : p.value("overrides", ordered_json::array())) {
            if (!o.contains("road") || !o.contains("p"))
                fail(context, "p_table overrides need 'road' and 'p'");
            s.p_table.overrides[{o["road"].get<int>(), o.value("zeta", -1)}] =
                o["p"].get<double>();
        }
    }
    if (j.contains("q_table")) {
        for (const auto& o :
             j["q_table"].value("overrides", ordered_json::array())) {
            if (!o.contains("from") || !o.contains("to") || !o.contains("q"))
                fail(context, "q_table overrides need 'from', 'to' and 'q'");
            s.q_table.overrides[{o["from"].get<int>(), o["to"].get<int>(),
                                 o.value("zeta", -1)}] = o["q"].get<double>();
        }
    }

    s.u0 = get_number(j, "u0", 0.0, context);
    if (s.u0 < 0.0) fail(context, "u0 must be nonnegative");
    s.beta = get_number(j, "beta", 1.0, context);
    if (s.beta < 0.0) fail(context, "beta must be nonnegative");

    const int n = s.network.size();
    s.x0 = Eigen::VectorXd::Zero(n);
    if (j.contains("x0")) {
        const auto x0 = j["x0"].get<std::vector<double>>();
        if (static_cast<int>(x0.size()) != n)
            fail(context, "x0 length " + std::to_string(x0.size()) +
                              " != road count " + std::to_string(n));
        s.x0 = Eigen::Map<const Eigen::VectorXd>(x0.data(), n);
    }
    for (int i = 0; i < n; ++i)
        if (s.x0(i) < 0.0 || s.x0(i) > s.fd.rho_max)
            fail(context, "x0 entry outside [0, rho_max]");

    s.steps = static_cast<long>(get_number(j, "T", 60.0, context));
    if (s.steps < 1) fail(context, "T must be at least 1");
    s.eps = get_number(j, "eps", s.u0 > 0.0 ? 0.05 * s.u0 : 1e-6, context);
    if (!(s.eps > 0.0)) fail(context, "eps must be positive");
    s.hold_window = static_cast<long>(
        get_number(j, "hold_window", double(s.schedule.cycle_length), context));
    if (s.hold_window < 1) fail(context, "hold_window must be at least 1");
    s.seed = static_cast<unsigned long>(get_number(j, "seed", 0.0, context));
    return s;
}

std::string scenario_to_json(const Scenario& s) {
    ordered_json j;
    j["name"] = s.name;
    j["roads"] = s.network.roads;
    j["edges"] = ordered_json::array();
    for (const auto& [from, to] : s.network.edges)
        j["edges"].push_back({from, to});
    j["junctions"] = ordered_json::array();
    j["phases"] = ordered_json::array();
    for (const auto& junction : s.junctions) {
        j["junctions"].push_back(
            {{"id", junction.id}, {"roads", junction.roads}});
        ordered_json cycle = ordered_json::array();
        for (const auto& phase : junction.cycle) {
            ordered_json edges = ordered_json::array();
            for (const auto& [from, to] : phase.edge_subset)
                edges.push_back({from, to});
            cycle.push_back(std::move(edges));
        }
        j["phases"].push_back({{"junction", junction.id},
                               {"r", junction.cycle.size()},
                               {"cycle", std::move(cycle)}});
    }
    j["fd"] = {{"z_max", s.fd.z_max},
               {"rho_min", s.fd.rho_min},
               {"rho_mid", s.fd.rho_mid},
               {"rho_max", s.fd.rho_max}};
    ordered_json p_over = ordered_json::array();
    for (const auto& [key, value] : s.p_table.overrides)
        p_over.push_back(
            {{"road", key.first}, {"zeta", key.second}, {"p", value}});
    j["p_table"] = {{"on", s.p_table.on},
                    {"off", s.p_table.off},
                    {"outlet", s.p_table.outlet},
                    {"overrides", std::move(p_over)}};
    ordered_json q_over = ordered_json::array();
    for (const auto& [key, value] : s.q_table.overrides)
        q_over.push_back({{"from", std::get<0>(key)},
                          {"to", std::get<1>(key)},
                          {"zeta", std::get<2>(key)},
                          {"q", value}});
    j["q_table"] = {{"overrides", std::move(q_over)}};
    j["u0"] = s.u0;
    j["beta"] = s.beta;
    j["x0"] = std::vector<double>(s.x0.data(), s.x0.data() + s.x0.size());
    j["T"] = s.steps;
    j["eps"] = s.eps;
    j["hold_window"] = s.hold_window;
    j["seed"] = s.seed;
    return j.dump(2) + "\n";
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return scenario_from_json(buffer.str(), path);
}

void save_scenario(const Scenario& scenario, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << scenario_to_json(scenario);
    if (!out) throw IoError("write failed on " + path);
}

namespace {

struct JunctionTable {
    int id;
    std::vector<int> in;
    std::vector<int> out;
};

// Downtown benchmark connectivity: per junction, incoming roads in signal
// cycle order and the outgoing roads they feed.
const std::vector<JunctionTable>& phoenix_junctions() {
    static const std::vector<JunctionTable> table = {
        {1, {1, 34, 52}, {33, 53, 38}},
        {2, {48, 5, 60}, {29, 41, 22}},
        {3, {47, 3, 29, 51}, {32, 28, 48, 20}},
        {4, {9, 4, 28, 55}, {47, 36, 15, 21}},
        {5, {25, 30, 43}, {24, 44, 12}},
        {6, {38, 31, 56, 49}, {30, 37, 57, 50}},
        {7, {27, 32, 45, 50}, {26, 31, 46, 51}},
        {8, {24, 42, 6}, {23, 43, 49}},
        {9, {23, 39, 7}, {13, 42, 58}},
        {10, {33, 44, 10}, {25, 16, 52}},
        {11, {26, 41, 8, 59}, {14, 45, 40, 60}},
        {12, {2, 36, 46, 54}, {27, 19, 35, 55}},
        {13, {35, 57, 53}, {34, 18, 54}},
        {14, {37, 40, 11, 58}, {17, 56, 39, 59}},
    };
    return table;
}

// U-turn movements left out of the benchmark so the road graph stays free
// of antiparallel pairs (each two-way street keeps one turn-back direction).
const std::set<std::pair<int, int>>& phoenix_excluded() {
    static const std::set<std::pair<int, int>> excl = {
        {2, 19},  {3, 20},  {4, 21},  {9, 15},  {5, 22},  {7, 13},  {8, 14},
        {10, 16}, {11, 17}, {44, 25}, {24, 43}, {23, 42}, {27, 46}, {26, 45},
        {28, 47}, {29, 48}, {37, 56}, {33, 52}, {53, 34}, {35, 54}, {55, 36},
        {50, 31}, {32, 51}, {58, 39}, {40, 59}, {41, 60}};
    return excl;
}

} // namespace

Scenario phoenix_scenario() {
    Scenario s;
    s.name = "phoenix";

    std::vector<int> roads(60);
    for (int i = 0; i < 60; ++i) roads[static_cast<std::size_t>(i)] = i + 1;

    std::vector<std::pair<int, int>> edges;
    const auto& excl = phoenix_excluded();
    for (const auto& junction : phoenix_junctions()) {
        for (int a : junction.in)
            for (int b : junction.out)
                if (!excl.count({a, b})) edges.emplace_back(a, b);
    }
    s.network = build_network(roads, edges);

    for (const auto& junction : phoenix_junctions()) {
        JunctionSpec spec;
        spec.id = junction.id;
        spec.roads = junction.in;
        spec.roads.insert(spec.roads.end(), junction.out.begin(),
                          junction.out.end());
        for (int a : junction.in) {
            MovementPhase phase;
            phase.junction_id = junction.id;
            for (int b : junction.out)
                if (!excl.count({a, b})) phase.edge_subset.emplace_back(a, b);
            spec.cycle.push_back(std::move(phase));
        }
        s.junctions.push_back(std::move(spec));
    }
    s.schedule = build_phase_schedule(s.network, s.junctions);

    // benchmark discharge probabilities: keep served roads at the stock
    // value but let idle roads seep and outlets buffer, so the outlet
    // balance settles inside the monitor tolerance within the run
    s.p_table.on = 0.8;
    s.p_table.off = 0.2;
    s.p_table.outlet = 0.25;

    s.u0 = 50.0;
    s.beta = 1.0;
    s.x0 = Eigen::VectorXd::Zero(s.network.size());
    s.steps = 60;
    s.eps = 0.05 * s.u0;
    s.hold_window = s.schedule.cycle_length;
    return s;
}

Trace run(const Scenario& scenario) {
    const std::vector<PhaseMatrices> mats = build_all_phase_matrices(
        scenario.network, scenario.schedule, scenario.p_table, scenario.q_table);
    const Controller controller(scenario.network, scenario.schedule, mats,
                                scenario.fd, scenario.u0, scenario.beta);
    const InputMatrix input = build_input_matrix(scenario.network);
    const int nc = scenario.schedule.cycle_length;

    std::vector<int> outlet_index;
    for (int id : scenario.network.outlet_ids)
        outlet_index.push_back(scenario.network.index_of(id));

    MonitorConfig mon;
    mon.fd = scenario.fd;
    mon.u0 = scenario.u0;
    mon.cycle_length = nc;

    Trace trace;
    TrafficState state{scenario.x0, 0};
    for (long k = 0; k < scenario.steps; ++k) {
        const int zeta = static_cast<int>(k % nc);
        const PhaseMatrices& phase = mats[static_cast<std::size_t>(zeta)];

        Controller::StepInfo info;
        Eigen::VectorXd u;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            u = controller.solve_step(state, &info);
        } catch (const QpInfeasible&) {
            trace.status = RunStatus::InfeasibleAborted;
            trace.infeasible_at = k;
            break;
        }
        const auto t1 = std::chrono::steady_clock::now();
        trace.qp_stats.push_back(
            {info.iterations, info.kkt,
             std::chrono::duration<double>(t1 - t0).count()});

        TraceRecord rec;
        rec.k = k;
        rec.x = state.x;
        rec.u = u;
        rec.z = outflows(state, phase);
        rec.zeta = zeta;
        rec.outlet_outflow_sum = 0.0;
        for (int idx : outlet_index) rec.outlet_outflow_sum += rec.z(idx);

        const auto violations = check_safety(rec, mon);
        trace.safety_violations.insert(trace.safety_violations.end(),
                                       violations.begin(), violations.end());
        trace.records.push_back(std::move(rec));

        const TrafficState next = step(state, phase, input, u, scenario.fd);
        const double residual =
            std::abs(next.x.sum() - state.x.sum() - u.sum() +
                     trace.records.back().outlet_outflow_sum);
        trace.max_mass_residual = std::max(trace.max_mass_residual, residual);
        state = next;
    }

    if (!trace.records.empty())
        trace.liveness = check_liveness(trace.records, scenario.u0,
                                        scenario.eps, scenario.hold_window);
    return trace;
}

namespace {

std::string fmt9(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << body;
    if (!out) throw IoError("write failed on " + path.string());
}

} // namespace

void export_csv(const Trace& trace, const std::string& out_dir,
                const Scenario* scenario) {
    if (trace.records.empty()) throw EmptyTrace("nothing to export");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    const std::filesystem::path dir(out_dir);

    const Eigen::Index n_in = trace.records.front().u.size();
    const Eigen::Index n = trace.records.front().x.size();

    std::string inflows = "k";
    for (Eigen::Index i = 0; i < n_in; ++i)
        inflows += ",u_" + std::to_string(i + 1);
    inflows += "\n";
    for (const auto& rec : trace.records) {
        inflows += std::to_string(rec.k);
        for (Eigen::Index i = 0; i < n_in; ++i)
            inflows += "," + fmt9(rec.u(i));
        inflows += "\n";
    }
    write_file(dir / "inflows.csv", inflows);

    std::string outflows = "k";
    for (Eigen::Index i = 0; i < n; ++i)
        outflows += ",z_" + std::to_string(i + 1);
    outflows += "\n";
    for (const auto& rec : trace.records) {
        outflows += std::to_string(rec.k);
        for (Eigen::Index i = 0; i < n; ++i) outflows += "," + fmt9(rec.z(i));
        outflows += "\n";
    }
    write_file(dir / "outflows.csv", outflows);

    std::string density = "k";
    for (Eigen::Index i = 0; i < n; ++i)
        density += ",rho_" + std::to_string(i + 1);
    density += ",total\n";
    for (const auto& rec : trace.records) {
        density += std::to_string(rec.k);
        for (Eigen::Index i = 0; i < n; ++i) density += "," + fmt9(rec.x(i));
        density += "," + fmt9(rec.x.sum()) + "\n";
    }
    write_file(dir / "density.csv", density);

    std::string verdict;
    if (scenario != nullptr) {
        verdict += "scenario: " + scenario->name + "\n";
        verdict += "roads: " + std::to_string(scenario->network.size()) + "\n";
        verdict += "inlets: " + std::to_string(scenario->network.inlet_count()) +
                   "\n";
        verdict += "cycle_length: " +
                   std::to_string(scenario->schedule.cycle_length) + "\n";
        verdict += "u0: " + fmt9(scenario->u0) + "\n";
        verdict += "beta: " + fmt9(scenario->beta) + "\n";
        verdict += "fd: z_max=" + fmt9(scenario->fd.z_max) +
                   " rho_min=" + fmt9(scenario->fd.rho_min) +
                   " rho_mid=" + fmt9(scenario->fd.rho_mid) +
                   " rho_max=" + fmt9(scenario->fd.rho_max) + "\n";
        verdict += "p_defaults: on=" + fmt9(scenario->p_table.on) +
                   " off=" + fmt9(scenario->p_table.off) +
                   " outlet=" + fmt9(scenario->p_table.outlet) + "\n";
        verdict += "eps: " + fmt9(scenario->eps) + "\n";
        verdict += "hold_window: " + std::to_string(scenario->hold_window) + "\n";
        verdict += "seed: " + std::to_string(scenario->seed) + "\n";
    }
    verdict += "status: ";
    verdict += trace.status == RunStatus::Completed ? "completed"
                                                    : "infeasible_aborted";
    verdict += "\n";
    if (trace.infeasible_at >= 0)
        verdict += "infeasible_at: " + std::to_string(trace.infeasible_at) + "\n";
    verdict += "steps_recorded: " + std::to_string(trace.records.size()) + "\n";
    verdict += "safety_violations: " +
               std::to_string(trace.safety_violations.size()) + "\n";
    for (std::size_t i = 0; i < trace.safety_violations.size() && i < 20; ++i) {
        const auto& v = trace.safety_violations[i];
        verdict += "  k=" + std::to_string(v.k) + " " + v.formula +
                   " road_index=" + std::to_string(v.road_index) +
                   " margin=" + fmt9(v.margin) + "\n";
    }
    verdict += "liveness: ";
    verdict += trace.liveness.satisfied
                   ? "satisfied_at " + std::to_string(trace.liveness.satisfied_at)
                   : std::string("not_yet_satisfied");
    verdict += "\n";
    verdict += "liveness_eps: " + fmt9(trace.liveness.epsilon) + "\n";
    verdict += "max_mass_residual: " + fmt9(trace.max_mass_residual) + "\n";
    write_file(dir / "verdict.txt", verdict);
}

} // namespace noir
