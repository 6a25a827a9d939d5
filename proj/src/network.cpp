#include "noir/network.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>

namespace noir {

namespace {

std::string edge_str(int i, int j) {
    return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

} // namespace

int RoadNetwork::index_of(int road_id) const {
    auto it = index_.find(road_id);
    if (it == index_.end())
        throw UnknownRoadId("road " + std::to_string(road_id));
    return it->second;
}

bool RoadNetwork::has_edge(int from, int to) const {
    if (!has_road(from) || !has_road(to)) return false;
    const auto& outs = out_adj_[index_.at(from)];
    return std::binary_search(outs.begin(), outs.end(), to);
}

const std::vector<int>& RoadNetwork::in_neighbors(int road_id) const {
    return in_adj_[index_of(road_id)];
}

const std::vector<int>& RoadNetwork::out_neighbors(int road_id) const {
    return out_adj_[index_of(road_id)];
}

RoadNetwork build_network(std::vector<int> roads,
                          std::vector<std::pair<int, int>> edges) {
    RoadNetwork net;
    net.roads = std::move(roads);
    std::sort(net.roads.begin(), net.roads.end());
    for (std::size_t i = 0; i < net.roads.size(); ++i) {
        if (!net.index_.emplace(net.roads[i], static_cast<int>(i)).second)
            throw UnknownRoadId("duplicate road id " + std::to_string(net.roads[i]));
    }

    std::set<std::pair<int, int>> edge_set;
    for (const auto& [from, to] : edges) {
        if (from == to)
            throw SelfLoop("edge " + edge_str(from, to));
        if (!net.has_road(from))
            throw UnknownRoadId("edge tail " + std::to_string(from));
        if (!net.has_road(to))
            throw UnknownRoadId("edge head " + std::to_string(to));
        if (edge_set.count({to, from}))
            throw AntiparallelEdge("edges " + edge_str(from, to) + " and " +
                                   edge_str(to, from));
        edge_set.insert({from, to});
    }
    net.edges.assign(edge_set.begin(), edge_set.end());

    const int n = net.size();
    net.in_adj_.resize(n);
    net.out_adj_.resize(n);
    for (const auto& [from, to] : net.edges) {
        net.out_adj_[net.index_.at(from)].push_back(to);
        net.in_adj_[net.index_.at(to)].push_back(from);
    }
    for (int i = 0; i < n; ++i) {
        std::sort(net.in_adj_[i].begin(), net.in_adj_[i].end());
        std::sort(net.out_adj_[i].begin(), net.out_adj_[i].end());
    }

    for (int i = 0; i < n; ++i) {
        const bool has_in = !net.in_adj_[i].empty();
        const bool has_out = !net.out_adj_[i].empty();
        if (!has_in && !has_out)
            throw IsolatedRoad("road " + std::to_string(net.roads[i]));
        if (!has_in)
            net.inlet_ids.push_back(net.roads[i]);
        else if (!has_out)
            net.outlet_ids.push_back(net.roads[i]);
        else
            net.interior_ids.push_back(net.roads[i]);
    }
    return net;
}

std::pair<std::vector<int>, std::vector<int>> neighbors(const RoadNetwork& net,
                                                        int road_id) {
    return {net.in_neighbors(road_id), net.out_neighbors(road_id)};
}

PhaseSchedule build_phase_schedule(const RoadNetwork& net,
                                   const std::vector<JunctionSpec>& junctions) {
    PhaseSchedule schedule;
    long lcm = 1;
    for (const auto& junction : junctions) {
        if (junction.cycle.empty())
            throw EmptyCycle("junction " + std::to_string(junction.id));
        std::set<int> incident(junction.roads.begin(), junction.roads.end());
        for (const auto& phase : junction.cycle) {
            for (const auto& [from, to] : phase.edge_subset) {
                if (!net.has_edge(from, to))
                    throw PhaseEdgeNotAtJunction(
                        "junction " + std::to_string(junction.id) + ": edge " +
                        edge_str(from, to) + " is not a network edge");
                if (!incident.count(from) && !incident.count(to))
                    throw PhaseEdgeNotAtJunction(
                        "junction " + std::to_string(junction.id) + ": edge " +
                        edge_str(from, to) + " touches no declared incident road");
            }
        }
        schedule.junction_ids.push_back(junction.id);
        schedule.junction_cycles.push_back(junction.cycle);
        lcm = std::lcm(lcm, static_cast<long>(junction.cycle.size()));
    }
    schedule.cycle_length = static_cast<int>(lcm);
    return schedule;
}

ActivePhase active_phase(const PhaseSchedule& schedule, long k) {
    ActivePhase active;
    active.zeta = static_cast<int>(k % schedule.cycle_length);
    active.gamma = static_cast<int>((k + 1) % schedule.cycle_length);
    active.junction_phase_index.reserve(schedule.junction_count());
    for (int j = 0; j < schedule.junction_count(); ++j)
        active.junction_phase_index.push_back(
            static_cast<int>(k % schedule.phase_count(j)));
    return active;
}

} // namespace noir
