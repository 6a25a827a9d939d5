#pragma once

#include <utility>
#include <vector>

#include <unordered_map>

#include "noir/errors.hpp"

namespace noir {

/// Directed graph of unidirectional roads. Nodes are roads; an edge (i,j)
/// means traffic leaving road i may continue onto road j. Roads with no
/// in-neighbors are inlets, roads with no out-neighbors are outlets, the
/// rest are interior.
struct RoadNetwork {
    std::vector<int> roads;                    // road ids, ascending
    std::vector<std::pair<int, int>> edges;    // (from, to), sorted
    std::vector<int> inlet_ids;
    std::vector<int> outlet_ids;
    std::vector<int> interior_ids;

    int size() const { return static_cast<int>(roads.size()); }
    int inlet_count() const { return static_cast<int>(inlet_ids.size()); }

    /// 0-based dense index of a road id. Throws UnknownRoadId.
    int index_of(int road_id) const;
    bool has_road(int road_id) const { return index_.count(road_id) != 0; }
    bool has_edge(int from, int to) const;

    /// Road ids j with (j,i) in E, sorted.
    const std::vector<int>& in_neighbors(int road_id) const;
    /// Road ids j with (i,j) in E, sorted.
    const std::vector<int>& out_neighbors(int road_id) const;

    bool is_outlet(int road_id) const { return out_neighbors(road_id).empty(); }

    // filled by build_network
    std::unordered_map<int, int> index_;
    std::vector<std::vector<int>> in_adj_;    // by index, road ids
    std::vector<std::vector<int>> out_adj_;
};

RoadNetwork build_network(std::vector<int> roads,
                          std::vector<std::pair<int, int>> edges);

/// (in-neighbors, out-neighbors) of road i.
std::pair<std::vector<int>, std::vector<int>> neighbors(const RoadNetwork& net,
                                                        int road_id);

/// One signal phase at a junction: the subset of edges given right-of-way.
struct MovementPhase {
    int junction_id = 0;
    std::vector<std::pair<int, int>> edge_subset;
};

/// Scenario-level declaration of a junction: which roads are incident to it
/// and its ordered phase cycle (repetition allowed, encoding duration).
struct JunctionSpec {
    int id = 0;
    std::vector<int> roads;               // incident road ids
    std::vector<MovementPhase> cycle;     // length r_i
};

/// Deterministic cyclic schedule over all junctions. All junctions advance
/// simultaneously; the global period is lcm of the per-junction cycle
/// lengths.
struct PhaseSchedule {
    std::vector<int> junction_ids;
    std::vector<std::vector<MovementPhase>> junction_cycles;
    int cycle_length = 1;   // n_c

    int junction_count() const { return static_cast<int>(junction_ids.size()); }
    int phase_count(int junction_pos) const {
        return static_cast<int>(junction_cycles[junction_pos].size());
    }
};

PhaseSchedule build_phase_schedule(const RoadNetwork& net,
                                   const std::vector<JunctionSpec>& junctions);

/// Phase activity at a discrete time: the global cycle position, its
/// successor, and the per-junction active phase index.
struct ActivePhase {
    int zeta = 0;
    int gamma = 0;
    std::vector<int> junction_phase_index;   // k mod r_i, per junction
};

ActivePhase active_phase(const PhaseSchedule& schedule, long k);

} // namespace noir
