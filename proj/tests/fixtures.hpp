#pragma once

#include "shbft/quorum_graph.hpp"

#include <vector>

namespace shbft::test {

/// `levels` quorums of `size` consecutive IDs stacked in a single column.
inline QuorumGraph column_graph(std::uint32_t levels, std::uint32_t size) {
    std::vector<std::vector<NodeId>> quorums(levels);
    std::uint32_t next = 0;
    for (auto& q : quorums) {
        for (std::uint32_t i = 0; i < size; ++i) q.push_back(NodeId{next++});
    }
    return QuorumGraph::from_quorums(next, levels, 1, std::move(quorums));
}

} // namespace shbft::test
