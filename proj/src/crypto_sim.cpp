#include "shbft/crypto_sim.hpp"

#include "shbft/rng.hpp"

#include <algorithm>

namespace shbft {
namespace {

std::uint64_t mac(std::uint64_t key, std::uint64_t a, std::uint64_t b = 0) {
    return mix64(key ^ mix64(a ^ mix64(b + 0x51ED270B27A8F1E3ULL)));
}

constexpr std::uint64_t kQuorumTag = 0x71;
constexpr std::uint64_t kPublicTag = 0x9B;
constexpr std::uint64_t kEphemeralTag = 0xE7;

} // namespace

ThresholdNotMet::ThresholdNotMet(std::size_t have_, std::size_t need_)
    : std::runtime_error("threshold not met: " + std::to_string(have_) + " valid shares, need " +
                         std::to_string(need_)),
      have(have_), need(need_) {}

CryptoSim::CryptoSim(const QuorumGraph& graph, std::uint64_t seed)
    : graph_(&graph), master_(rng_stream(seed, "dkg").next()) {}

Digest CryptoSim::digest(std::string_view bytes) {
    auto [it, inserted] = digests_.try_emplace(std::string(bytes), digests_.size() + 1);
    return Digest{it->second};
}

std::optional<Digest> CryptoSim::find_digest(std::string_view bytes) const {
    const auto it = digests_.find(std::string(bytes));
    if (it == digests_.end()) return std::nullopt;
    return Digest{it->second};
}

std::uint64_t CryptoSim::quorum_secret(QuorumId q) const {
    return mac(master_, kQuorumTag, graph_->index_of(q));
}

std::uint64_t CryptoSim::share_secret(QuorumId q, NodeId node) const {
    return mac(master_, graph_->index_of(q) + 1, std::uint64_t{node.value} + 1);
}

Token CryptoSim::public_token(QuorumId q) const { return Token{mac(quorum_secret(q), kPublicTag)}; }

QuorumKeyPair CryptoSim::key_pair(QuorumId q) const {
    QuorumKeyPair kp{q, PublicKey{q, public_token(q)}, {}};
    for (NodeId member : graph_->members(q)) kp.private_shares.emplace_back(member, Token{share_secret(q, member)});
    return kp;
}

bool CryptoSim::can_verify(NodeId viewer, QuorumId q) const {
    if (graph_->is_member(viewer, q)) return true;
    for (QuorumId mine : graph_->quorums_of(viewer)) {
        if (graph_->are_neighbors(mine, q)) return true;
    }
    return false;
}

PublicKey CryptoSim::public_key(QuorumId q, NodeId viewer) const {
    if (!can_verify(viewer, q)) {
        throw VerificationUnavailable(to_string(viewer) + " does not hold the public key of " + to_string(q));
    }
    return PublicKey{q, public_token(q)};
}

SignatureShare CryptoSim::sign_share(NodeId node, QuorumId q, std::string_view message) {
    return sign_share(node, q, digest(message));
}

SignatureShare CryptoSim::sign_share(NodeId node, QuorumId q, Digest message_digest) const {
    if (!graph_->is_member(node, q)) {
        throw MembershipError(to_string(node) + " is not a member of " + to_string(q));
    }
    return SignatureShare{node, q, message_digest, Token{mac(share_secret(q, node), message_digest.value)}};
}

bool CryptoSim::share_valid(const SignatureShare& share) const {
    if (!graph_->contains(share.quorum) || !graph_->is_member(share.signer, share.quorum)) return false;
    return share.share_token.bits == mac(share_secret(share.quorum, share.signer), share.message_digest.value);
}

std::optional<Token> CryptoSim::try_combine(QuorumId q, Digest message_digest,
                                            std::span<const SignatureShare> shares) const {
    std::vector<std::uint32_t> signers;
    signers.reserve(shares.size());
    for (const auto& share : shares) {
        if (share.quorum != q || share.message_digest != message_digest) continue;
        if (!share_valid(share)) continue;
        signers.push_back(share.signer.value);
    }
    std::sort(signers.begin(), signers.end());
    const auto distinct = static_cast<std::size_t>(std::unique(signers.begin(), signers.end()) - signers.begin());
    if (distinct < threshold(graph_->members(q).size())) return std::nullopt;
    return Token{mac(quorum_secret(q), message_digest.value)};
}

SignedMessage CryptoSim::combine_shares(QuorumId q, std::string_view message,
                                        std::span<const SignatureShare> shares) {
    const Digest d = digest(message);
    if (auto sig = try_combine(q, d, shares)) return SignedMessage{std::string(message), q, *sig};
    std::size_t valid = 0;
    std::vector<std::uint32_t> seen;
    for (const auto& share : shares) {
        if (share.quorum == q && share.message_digest == d && share_valid(share) &&
            std::find(seen.begin(), seen.end(), share.signer.value) == seen.end()) {
            seen.push_back(share.signer.value);
            ++valid;
        }
    }
    throw ThresholdNotMet(valid, threshold(graph_->members(q).size()));
}

bool CryptoSim::verify_digest(QuorumId q, Digest message_digest, Token signature) const {
    if (!graph_->contains(q)) return false;
    return signature.bits == mac(quorum_secret(q), message_digest.value);
}

bool CryptoSim::verify(const PublicKey& key, const SignedMessage& message) const {
    if (!graph_->contains(key.quorum) || key.quorum != message.quorum) return false;
    if (key.token != public_token(key.quorum)) return false;
    const auto d = find_digest(message.payload);
    if (!d) return false;
    return verify_digest(message.quorum, *d, message.quorum_signature);
}

EphemeralKeyPair CryptoSim::ephemeral_keypair(NodeId owner) {
    const std::uint64_t k_s = mac(master_, kEphemeralTag, ++ephemeral_counter_);
    const std::uint64_t k_p = mix64(k_s ^ kPublicTag);
    ephemeral_.emplace(k_p, std::make_pair(k_s, owner));
    return EphemeralKeyPair{Token{k_p}, Token{k_s}, owner};
}

SignedBlob CryptoSim::sign(Token k_s, std::string_view message) { return sign(k_s, digest(message)); }

SignedBlob CryptoSim::sign(Token k_s, Digest message_digest) const {
    return SignedBlob{message_digest, Token{mix64(k_s.bits ^ kPublicTag)}, Token{mac(k_s.bits, message_digest.value)}};
}

bool CryptoSim::verify_ephemeral(Token k_p, const SignedBlob& blob) const {
    const auto it = ephemeral_.find(k_p.bits);
    if (it == ephemeral_.end() || blob.k_p != k_p) return false;
    return blob.tag.bits == mac(it->second.first, blob.digest.value);
}

std::optional<NodeId> CryptoSim::ephemeral_owner(Token k_p) const {
    const auto it = ephemeral_.find(k_p.bits);
    if (it == ephemeral_.end()) return std::nullopt;
    return it->second.second;
}

} // namespace shbft
