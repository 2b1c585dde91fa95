#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace shbft {

/// Unique, totally ordered node identifier.
struct NodeId {
    std::uint32_t value{};
    friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

/// Butterfly coordinates of a quorum. Levels are 1-based.
struct QuorumId {
    std::uint32_t level{};
    std::uint32_t column{};
    friend constexpr auto operator<=>(QuorumId, QuorumId) = default;
};

/// Application payload carried along a quorum path.
struct Payload {
    std::uint64_t value{};
    friend constexpr auto operator<=>(Payload, Payload) = default;
};

/// Messages and rounds spent by a protocol step.
struct Cost {
    std::uint64_t messages{};
    std::uint64_t rounds{};

    Cost& operator+=(const Cost& other) {
        messages += other.messages;
        rounds += other.rounds;
        return *this;
    }
    friend Cost operator+(Cost a, const Cost& b) { return a += b; }
    friend bool operator==(const Cost&, const Cost&) = default;
};

class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

std::string to_string(NodeId id);
std::string to_string(QuorumId id);

} // namespace shbft

template <>
struct std::hash<shbft::NodeId> {
    std::size_t operator()(shbft::NodeId id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};

template <>
struct std::hash<shbft::QuorumId> {
    std::size_t operator()(shbft::QuorumId id) const noexcept {
        return std::hash<std::uint64_t>{}((std::uint64_t{id.level} << 32) | id.column);
    }
};
