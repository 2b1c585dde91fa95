#pragma once

#include "shbft/quorum_graph.hpp"
#include "shbft/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace shbft {

/// Opaque signature/key material. Values only mean something to the
/// CryptoSim instance that issued them.
struct Token {
    std::uint64_t bits{};
    friend constexpr bool operator==(Token, Token) = default;
};

/// Injective within one CryptoSim instance.
struct Digest {
    std::uint64_t value{};
    friend constexpr auto operator<=>(Digest, Digest) = default;
};

struct PublicKey {
    QuorumId quorum;
    Token token;
};

struct QuorumKeyPair {
    QuorumId quorum;
    PublicKey public_key;
    /// One share per member, sorted by node ID. The quorum private key is
    /// never stored; it only exists implicitly behind combine_shares().
    std::vector<std::pair<NodeId, Token>> private_shares;
};

struct SignatureShare {
    NodeId signer;
    QuorumId quorum;
    Digest message_digest;
    Token share_token;
};

struct SignedMessage {
    std::string payload;
    QuorumId quorum;
    Token quorum_signature;
};

struct EphemeralKeyPair {
    Token k_p;
    Token k_s;
    NodeId owner;
};

/// Output of sign(k_s, m): digest of the signed bytes plus the tag.
struct SignedBlob {
    Digest digest;
    Token k_p;
    Token tag;
    friend constexpr bool operator==(const SignedBlob&, const SignedBlob&) = default;
};

class MembershipError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ThresholdNotMet : public std::runtime_error {
public:
    ThresholdNotMet(std::size_t have, std::size_t need);
    std::size_t have;
    std::size_t need;
};

class VerificationUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Simulated (|Q|, 7|Q|/8 - 1) threshold signatures plus per-CHECK2
/// ephemeral key pairs.
///
/// Tokens are keyed 64-bit MACs over a master secret that never leaves
/// this object, so code outside it (in particular adversary strategies)
/// can only mint a verifying token by guessing 64 bits. Digests are
/// interned so that distinct byte strings never share a digest.
///
/// Constructing the object is the DKG setup step. One instance per trial;
/// not thread safe.
class CryptoSim {
public:
    CryptoSim(const QuorumGraph& graph, std::uint64_t seed);

    /// ceil(7|Q|/8).
    static std::size_t threshold(std::size_t quorum_size) { return (7 * quorum_size + 7) / 8; }

    Digest digest(std::string_view bytes);
    std::optional<Digest> find_digest(std::string_view bytes) const;

    QuorumKeyPair key_pair(QuorumId q) const;

    /// Public key of q as seen by `viewer`: only members of q and of its
    /// neighboring quorums hold it.
    PublicKey public_key(QuorumId q, NodeId viewer) const;
    bool can_verify(NodeId viewer, QuorumId q) const;

    SignatureShare sign_share(NodeId node, QuorumId q, std::string_view message);
    SignatureShare sign_share(NodeId node, QuorumId q, Digest message_digest) const;
    bool share_valid(const SignatureShare& share) const;

    /// Discards invalid, mismatched and duplicate shares, then requires
    /// threshold(|Q|) distinct signers.
    SignedMessage combine_shares(QuorumId q, std::string_view message, std::span<const SignatureShare> shares);
    /// Same check without building the payload-carrying message.
    std::optional<Token> try_combine(QuorumId q, Digest message_digest,
                                     std::span<const SignatureShare> shares) const;

    bool verify(const PublicKey& key, const SignedMessage& message) const;
    bool verify_digest(QuorumId q, Digest message_digest, Token signature) const;

    EphemeralKeyPair ephemeral_keypair(NodeId owner);
    SignedBlob sign(Token k_s, std::string_view message);
    SignedBlob sign(Token k_s, Digest message_digest) const;
    bool verify_ephemeral(Token k_p, const SignedBlob& blob) const;
    std::optional<NodeId> ephemeral_owner(Token k_p) const;

    const QuorumGraph& graph() const { return *graph_; }

private:
    std::uint64_t quorum_secret(QuorumId q) const;
    std::uint64_t share_secret(QuorumId q, NodeId node) const;
    Token public_token(QuorumId q) const;

    const QuorumGraph* graph_;
    std::uint64_t master_;
    std::uint64_t ephemeral_counter_{};
    std::unordered_map<std::string, std::uint64_t> digests_;
    std::unordered_map<std::uint64_t, std::pair<std::uint64_t, NodeId>> ephemeral_;
};

/// Free-function form of the DKG setup step.
inline CryptoSim dkg_setup(const QuorumGraph& graph, std::uint64_t seed) { return CryptoSim(graph, seed); }

} // namespace shbft
