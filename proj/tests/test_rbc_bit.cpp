#include <doctest.h>

#include "rbcast/rbc_bit.hpp"
#include "util.hpp"

using namespace rbcast;
using testutil::frag_msgs;
using testutil::random_bytes;

namespace {

BitNode make_node(uint32_t n, NodeId self, NodeId sender = 0,
                  bool strict = false) {
    BitConfig cfg;
    cfg.params = ProtocolParams::high_rate(n);
    cfg.self = self;
    cfg.sender = sender;
    cfg.instance = 1;
    cfg.strict_single_hash_fragments = strict;
    return BitNode(std::move(cfg));
}

size_t count_kind(const Outbox& out, const char* kind) {
    size_t c = 0;
    for (const auto& e : out.entries)
        if (std::string(kind_name(e.msg)) == kind) ++c;
    return c;
}

}  // namespace

TEST_CASE("start_broadcast disperses n-1 addressed fragments plus the "
          "sender's own proposal") {
    auto node = make_node(4, 0);
    auto m = random_bytes(330, 1);
    Outbox out = node.start_broadcast(m);

    size_t addressed = 0;
    RootHash root{};
    bool root_set = false;
    for (const auto& e : out.entries) {
        if (const auto* fm = std::get_if<FragmentMessage>(&e.msg)) {
            CHECK(e.to != kBroadcast);
            CHECK(fm->leaf_index == e.to);
            CHECK(valid_merkle_proof(fm->root, fm->fragment, fm->leaf_index,
                                     fm->proof, 4));
            if (!root_set) {
                root = fm->root;
                root_set = true;
            }
            CHECK(fm->root == root);
            ++addressed;
        }
    }
    CHECK(addressed == 3);
    // self-applied own fragment triggers the sender's proposal broadcast
    CHECK(count_kind(out, "proposal") == 1);
    CHECK(node.fragment_roots_sent().size() == 1);
    CHECK_FALSE(node.delivered().has_value());
}

TEST_CASE("non-sender invocation is rejected with state unchanged") {
    auto node = make_node(4, 1);
    CHECK_THROWS_AS(node.start_broadcast(random_bytes(10, 2)),
                    std::invalid_argument);
    CHECK(node.state_digest() == make_node(4, 1).state_digest());
}

TEST_CASE("acceptance rules silently drop bad fragments") {
    auto node = make_node(4, 1);
    auto msgs = frag_msgs(random_bytes(100, 3), ProtocolParams::high_rate(4));

    bool acc = false;
    SUBCASE("leaf index neither self nor origin") {
        node.on_message(3, msgs[2], 1, &acc);
        CHECK_FALSE(acc);
    }
    SUBCASE("invalid proof") {
        auto bad = msgs[1];
        bad.fragment.payload[0] ^= 1;
        node.on_message(0, bad, 1, &acc);
        CHECK_FALSE(acc);
    }
    SUBCASE("mismatched fragment index") {
        auto bad = msgs[1];
        bad.fragment.index = 2;
        node.on_message(0, bad, 1, &acc);
        CHECK_FALSE(acc);
    }
    SUBCASE("wrong instance") {
        auto other =
            frag_msgs(random_bytes(100, 3), ProtocolParams::high_rate(4), 2);
        node.on_message(0, other[1], 1, &acc);
        CHECK_FALSE(acc);
    }
    CHECK(node.state_digest() == make_node(4, 1).state_digest());
}

TEST_CASE("a third distinct root from one peer is dropped") {
    auto node = make_node(4, 1);
    auto params = ProtocolParams::high_rate(4);
    bool acc = false;

    for (uint64_t v = 0; v < 3; ++v) {
        auto msgs = frag_msgs(random_bytes(100, 50 + v), params);
        node.on_message(2, msgs[2], 1, &acc);  // relayed j = from
        CHECK(acc == (v < 2));
    }
    // proposals from that peer for a stored root still pass (set semantics)
    auto msgs = frag_msgs(random_bytes(100, 50), params);
    node.on_message(2, ProposalMessage{1, msgs[0].root}, 2, &acc);
    CHECK(acc);
    // but a third-root proposal is dropped too
    auto third = frag_msgs(random_bytes(100, 52), params);
    node.on_message(2, ProposalMessage{1, third[0].root}, 2, &acc);
    CHECK_FALSE(acc);
}

TEST_CASE("first own-fragment from the sender triggers the proposal") {
    auto node = make_node(4, 1);
    auto msgs = frag_msgs(random_bytes(100, 4), ProtocolParams::high_rate(4));

    Outbox out = node.on_message(0, msgs[1], 1);
    CHECK(count_kind(out, "proposal") == 1);

    // a second sender fragment for a different root does not re-trigger
    auto other = frag_msgs(random_bytes(100, 5), ProtocolParams::high_rate(4));
    Outbox out2 = node.on_message(0, other[1], 2);
    CHECK(count_kind(out2, "proposal") == 0);
}

TEST_CASE("a sender fragment for the sender's own index does not consume "
          "the proposal trigger") {
    auto node = make_node(4, 1);
    auto msgs = frag_msgs(random_bytes(100, 6), ProtocolParams::high_rate(4));

    Outbox o1 = node.on_message(0, msgs[0], 1);
    CHECK(count_kind(o1, "proposal") == 0);

    Outbox o2 = node.on_message(0, msgs[1], 2);
    CHECK(count_kind(o2, "proposal") == 1);
}

TEST_CASE("2t+1 proposals release the held fragment") {
    auto node = make_node(4, 1);
    auto msgs = frag_msgs(random_bytes(100, 6), ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;

    // own fragment relayed by a non-sender peer: no proposal trigger
    Outbox o1 = node.on_message(2, msgs[1], 1);
    CHECK(count_kind(o1, "fragment") == 0);

    node.on_message(2, ProposalMessage{1, h}, 2);
    Outbox o2 = node.on_message(3, ProposalMessage{1, h}, 2);
    CHECK(count_kind(o2, "fragment") == 0);  // only 2 proposers + none self

    // the 3rd proposer (quorum 2t+1 = 3) fires the broadcast
    Outbox o3 = node.on_message(0, ProposalMessage{1, h}, 3);
    CHECK(count_kind(o3, "fragment") == 1);
    CHECK(node.fragment_roots_sent() == std::set<RootHash>{h});

    // idempotent: duplicates change nothing
    Outbox o4 = node.on_message(0, ProposalMessage{1, h}, 4);
    CHECK(o4.entries.empty());
}

TEST_CASE("t+1 stored fragments trigger this node's proposal") {
    auto node = make_node(7, 1);  // t=2
    auto msgs = frag_msgs(random_bytes(100, 7), ProtocolParams::high_rate(7));

    Outbox o1 = node.on_message(2, msgs[2], 1);
    Outbox o2 = node.on_message(3, msgs[3], 1);
    CHECK(count_kind(o1, "proposal") + count_kind(o2, "proposal") == 0);
    Outbox o3 = node.on_message(4, msgs[4], 1);  // 3 = t+1 fragments
    CHECK(count_kind(o3, "proposal") == 1);
}

TEST_CASE("delivery recovers the message and tops up missing nodes") {
    auto node = make_node(7, 1);
    auto m = random_bytes(1000, 8);
    auto msgs = frag_msgs(m, ProtocolParams::high_rate(7));
    RootHash h = msgs[0].root;

    node.on_message(0, msgs[1], 1);  // own fragment, proposes
    for (NodeId v : {2, 3, 4, 5}) node.on_message(v, msgs[v], 1);
    for (NodeId v : {2, 3, 4, 5}) node.on_message(v, ProposalMessage{1, h}, 2);

    // proposers: self + 2,3,4,5 = 5 = 2t+1; fragments: 1,2,3,4,5 = 5
    REQUIRE(node.delivered().has_value());
    CHECK(*node.delivered() == m);
    CHECK(node.done());
}

TEST_CASE("top-up fragments go exactly to the nodes missing from R") {
    auto node = make_node(7, 1);
    auto m = random_bytes(1000, 9);
    auto msgs = frag_msgs(m, ProtocolParams::high_rate(7));
    RootHash h = msgs[0].root;

    node.on_message(0, msgs[1], 1);
    for (NodeId v : {2, 3, 4, 5}) node.on_message(v, msgs[v], 1);
    for (NodeId v : {2, 3, 4}) node.on_message(v, ProposalMessage{1, h}, 2);
    CHECK_FALSE(node.delivered().has_value());

    // R = {0, 1(self broadcast), 2, 3, 4, 5}; node 6 is missing
    Outbox out = node.on_message(5, ProposalMessage{1, h}, 3);
    REQUIRE(node.delivered().has_value());
    size_t topups = 0;
    for (const auto& e : out.entries)
        if (std::holds_alternative<FragmentMessage>(e.msg) &&
            e.to != kBroadcast) {
            CHECK(e.to == 6);
            ++topups;
        }
    CHECK(topups == 1);
}

TEST_CASE("recovered-root mismatch sets done without delivering") {
    BitConfig cfg;
    cfg.params = ProtocolParams::high_rate(4);
    cfg.self = 1;
    cfg.sender = 0;
    cfg.instance = 1;
    cfg.recover_override = [](const std::vector<Fragment>&,
                              const ProtocolParams&) {
        return std::vector<uint8_t>(64, 0x5a);  // wrong message
    };
    BitNode node(std::move(cfg));

    auto msgs = frag_msgs(random_bytes(100, 10), ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;
    node.on_message(0, msgs[1], 1);
    for (NodeId v : {2, 3}) node.on_message(v, msgs[v], 1);
    Outbox last;
    for (NodeId v : {0, 2, 3}) last = node.on_message(v, ProposalMessage{1, h}, 2);

    CHECK(node.done());
    CHECK_FALSE(node.delivered().has_value());
    CHECK(count_kind(last, "fragment") == 0);  // no top-up resend
}

TEST_CASE("strict mode rejects a second fragment-bearing root per peer") {
    auto strict = make_node(4, 1, 0, true);
    auto params = ProtocolParams::high_rate(4);
    auto a = frag_msgs(random_bytes(100, 11), params);
    auto b = frag_msgs(random_bytes(100, 12), params);

    bool acc = false;
    strict.on_message(2, a[2], 1, &acc);
    CHECK(acc);
    strict.on_message(2, b[2], 1, &acc);
    CHECK_FALSE(acc);
    // a proposal for the second root is still fine (H limit is 2)
    strict.on_message(2, ProposalMessage{1, b[0].root}, 1, &acc);
    CHECK(acc);

    // default mode accepts both fragment roots
    auto loose = make_node(4, 1);
    loose.on_message(2, a[2], 1, &acc);
    CHECK(acc);
    loose.on_message(2, b[2], 1, &acc);
    CHECK(acc);
}

TEST_CASE("delta gate holds delivery until the wake time") {
    BitConfig cfg;
    cfg.params = ProtocolParams::high_rate(4);
    cfg.self = 1;
    cfg.sender = 0;
    cfg.instance = 1;
    cfg.delta = 10;
    BitNode node(std::move(cfg));

    auto m = random_bytes(100, 13);
    auto msgs = frag_msgs(m, ProtocolParams::high_rate(4));
    RootHash h = msgs[0].root;
    node.on_message(0, msgs[1], 1);
    for (NodeId v : {2, 3}) node.on_message(v, msgs[v], 2);
    Outbox out;
    for (NodeId v : {0, 2, 3}) out = node.on_message(v, ProposalMessage{1, h}, 3);

    CHECK_FALSE(node.delivered().has_value());
    REQUIRE(out.wake_at.has_value());
    CHECK(*out.wake_at == 11);  // first fragment at 1 + delta 10

    node.on_timer(11);
    REQUIRE(node.delivered().has_value());
    CHECK(*node.delivered() == m);
    CHECK(*node.delivered_at() == 11);
}
