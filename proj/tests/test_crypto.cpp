#include "fixtures.hpp"
#include "shbft/crypto_sim.hpp"

#include "doctest.h"

using namespace shbft;

namespace {

std::vector<SignatureShare> shares_from(CryptoSim& crypto, const QuorumGraph& g, QuorumId q, std::string_view msg,
                                        std::size_t count) {
    std::vector<SignatureShare> out;
    const auto members = g.members(q);
    for (std::size_t i = 0; i < count; ++i) out.push_back(crypto.sign_share(members[i], q, msg));
    return out;
}

} // namespace

TEST_CASE("threshold is ceil(7|Q|/8)") {
    CHECK(CryptoSim::threshold(8) == 7);
    CHECK(CryptoSim::threshold(55) == 49);
    CHECK(CryptoSim::threshold(59) == 52);
    CHECK(CryptoSim::threshold(40) == 35);
}

TEST_CASE("DKG hands out one share per member") {
    const auto g = QuorumGraph::build_butterfly(14116, 4);
    CryptoSim crypto = dkg_setup(g, 4);
    const QuorumId q{3, 17};
    const auto kp = crypto.key_pair(q);
    CHECK(kp.private_shares.size() == 55);
    CHECK(kp.quorum == q);
    for (std::size_t i = 0; i < kp.private_shares.size(); ++i) CHECK(kp.private_shares[i].first == g.members(q)[i]);
}

TEST_CASE("only members of Q and of its neighbors hold Q's public key") {
    const auto g = test::column_graph(3, 8);
    CryptoSim crypto(g, 1);
    const QuorumId q1{1, 0};
    CHECK(crypto.can_verify(NodeId{0}, q1));
    CHECK(crypto.can_verify(NodeId{9}, q1));
    CHECK_FALSE(crypto.can_verify(NodeId{17}, q1));
    CHECK_NOTHROW(crypto.public_key(q1, NodeId{9}));
    CHECK_THROWS_AS(crypto.public_key(q1, NodeId{17}), VerificationUnavailable);
}

TEST_CASE("shares are deterministic and restricted to members") {
    const auto g = test::column_graph(2, 8);
    CryptoSim crypto(g, 2);
    const QuorumId q{1, 0};
    const auto a = crypto.sign_share(NodeId{3}, q, "m");
    const auto b = crypto.sign_share(NodeId{3}, q, "m");
    CHECK(a.share_token == b.share_token);
    CHECK(crypto.share_valid(a));
    CHECK_THROWS_AS(crypto.sign_share(NodeId{12}, q, "m"), MembershipError);
}

TEST_CASE("combining needs 7 of 8 distinct valid shares") {
    const auto g = test::column_graph(2, 8);
    CryptoSim crypto(g, 3);
    const QuorumId q{1, 0};
    auto seven = shares_from(crypto, g, q, "hello", 7);
    const auto signed_msg = crypto.combine_shares(q, "hello", seven);
    CHECK(signed_msg.payload == "hello");
    CHECK(crypto.verify(crypto.public_key(q, NodeId{0}), signed_msg));

    auto six = shares_from(crypto, g, q, "hello", 6);
    CHECK_THROWS_AS(crypto.combine_shares(q, "hello", six), ThresholdNotMet);

    // Duplicates and shares over another message do not count.
    six.push_back(six.front());
    six.push_back(crypto.sign_share(g.members(q)[7], q, "other"));
    CHECK_THROWS_AS(crypto.combine_shares(q, "hello", six), ThresholdNotMet);
}

TEST_CASE("49 valid shares plus forged ones combine at |Q| = 55") {
    const auto g = QuorumGraph::build_butterfly(14116, 5);
    CryptoSim crypto(g, 5);
    const QuorumId q{2, 9};
    auto shares = shares_from(crypto, g, q, "payload", 49);
    const auto members = g.members(q);
    for (std::size_t i = 49; i < 52; ++i) {
        shares.push_back(SignatureShare{members[i], q, crypto.digest("payload"), Token{0xDEAD0000 + i}});
        CHECK_FALSE(crypto.share_valid(shares.back()));
    }
    const auto sm = crypto.combine_shares(q, "payload", shares);
    CHECK(crypto.verify(crypto.public_key(q, members[0]), sm));

    shares.erase(shares.begin());
    try {
        crypto.combine_shares(q, "payload", shares);
        FAIL("expected ThresholdNotMet");
    } catch (const ThresholdNotMet& e) {
        CHECK(e.have == 48);
        CHECK(e.need == 49);
    }
}

TEST_CASE("verification rejects mutated payloads and forged signatures") {
    const auto g = test::column_graph(2, 8);
    CryptoSim crypto(g, 6);
    const QuorumId q{1, 0};
    auto shares = shares_from(crypto, g, q, "m", 8);
    const auto sm = crypto.combine_shares(q, "m", shares);
    const auto pk = crypto.public_key(q, NodeId{1});
    CHECK(crypto.verify(pk, sm));

    auto mutated = sm;
    mutated.payload = "m2";
    CHECK_FALSE(crypto.verify(pk, mutated));

    auto forged = sm;
    forged.quorum_signature = Token{sm.quorum_signature.bits ^ 1};
    CHECK_FALSE(crypto.verify(pk, forged));

    const auto other = crypto.public_key(QuorumId{2, 0}, NodeId{1});
    CHECK_FALSE(crypto.verify(other, sm));
}

TEST_CASE("ephemeral keys sign and verify") {
    const auto g = test::column_graph(2, 8);
    CryptoSim crypto(g, 7);
    const auto kp = crypto.ephemeral_keypair(NodeId{4});
    const auto other = crypto.ephemeral_keypair(NodeId{4});
    CHECK_FALSE(kp.k_p == other.k_p);
    CHECK(crypto.ephemeral_owner(kp.k_p) == NodeId{4});
    CHECK_FALSE(crypto.ephemeral_owner(Token{12345}).has_value());

    const auto blob = crypto.sign(kp.k_s, "probe");
    CHECK(crypto.verify_ephemeral(kp.k_p, blob));
    CHECK_FALSE(crypto.verify_ephemeral(other.k_p, blob));

    auto mutated = blob;
    mutated.digest = crypto.digest("probe2");
    CHECK_FALSE(crypto.verify_ephemeral(kp.k_p, mutated));

    auto retagged = blob;
    retagged.tag = Token{blob.tag.bits + 1};
    CHECK_FALSE(crypto.verify_ephemeral(kp.k_p, retagged));
}

TEST_CASE("digests are interned") {
    const auto g = test::column_graph(2, 8);
    CryptoSim crypto(g, 8);
    const auto a = crypto.digest("abc");
    CHECK(crypto.digest("abc") == a);
    CHECK_FALSE(crypto.digest("abd") == a);
    CHECK(crypto.find_digest("abc") == a);
    CHECK_FALSE(crypto.find_digest("never").has_value());
}
