#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "rbcast/hash.hpp"
#include "rbcast/merkle.hpp"
#include "rbcast/params.hpp"

namespace rbcast {

/// What gets signed: a root hash tied to one broadcast instance, so
/// signatures cannot be replayed across executions.
struct SignSubject {
    uint64_t instance = 0;
    RootHash root{};

    bool operator==(const SignSubject&) const = default;
    auto operator<=>(const SignSubject&) const = default;
};

struct SignatureShare {
    NodeId signer = 0;
    SignSubject subject;
    std::vector<uint8_t> blob;

    bool operator==(const SignatureShare&) const = default;
};

struct ThresholdSignature {
    SignSubject subject;
    std::vector<NodeId> signers;   // sorted, distinct; 2t+1 of them
    std::vector<uint8_t> blob;

    bool operator==(const ThresholdSignature&) const = default;
};

/// (2t+1)-of-n threshold signature provider. Real schemes (BLS etc.) plug in
/// behind this interface without touching protocol code.
class ThresholdProvider {
public:
    virtual ~ThresholdProvider() = default;

    virtual SignatureShare threshold_sign(NodeId node,
                                          const SignSubject& subject) const = 0;
    virtual bool valid_share(const SignSubject& subject, NodeId signer,
                             const SignatureShare& share) const = 0;
    /// Combines >= 2t+1 valid shares with distinct signers over one subject.
    /// Throws std::invalid_argument if the threshold is not met, subjects are
    /// mixed, or any share is invalid.
    virtual ThresholdSignature compute_signature(
        const std::vector<SignatureShare>& shares) const = 0;
    virtual bool valid_signature(const SignSubject& subject,
                                 const ThresholdSignature& sig) const = 0;
};

/// Simulation-grade provider: shares are MAC-style digests under a per-run
/// secret held by the harness; a signature is a digest over the subject plus
/// the sorted list of 2t+1 signer ids. Not cryptographically secure, but
/// unforgeable within the simulator, which never exposes the secret.
class SimThresholdProvider final : public ThresholdProvider {
public:
    SimThresholdProvider(const ProtocolParams& params, uint64_t run_secret);

    SignatureShare threshold_sign(NodeId node,
                                  const SignSubject& subject) const override;
    bool valid_share(const SignSubject& subject, NodeId signer,
                     const SignatureShare& share) const override;
    ThresholdSignature compute_signature(
        const std::vector<SignatureShare>& shares) const override;
    bool valid_signature(const SignSubject& subject,
                         const ThresholdSignature& sig) const override;

private:
    Digest share_mac(NodeId signer, const SignSubject& subject) const;
    Digest signature_mac(const SignSubject& subject,
                         const std::vector<NodeId>& signers) const;

    ProtocolParams params_;
    uint64_t secret_;
};

}  // namespace rbcast
