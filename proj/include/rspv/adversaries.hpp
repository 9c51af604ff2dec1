#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rspv/protocol.hpp"

namespace rspv::adv {

using Params = std::map<std::string, std::string>;

struct ParamSpec {
    std::string name;
    std::string default_value;
    std::string help;
};

struct StrategyDescriptor {
    std::string name;
    std::vector<std::string> protocols;  // sorted; "*" = every protocol
    std::vector<ParamSpec> params;
    std::string summary;
};

struct BadParameter : ProtocolError { using ProtocolError::ProtocolError; };

// Sorted by name.
const std::vector<StrategyDescriptor>& descriptors();
const StrategyDescriptor& descriptor(const std::string& name);

// Throws UnknownStrategy or BadParameter.
std::shared_ptr<const Adversary> make_adversary(const std::string& name, const Params& params = {});

// Throws InapplicableProtocol when the strategy does not declare the protocol.
void require_applicable(const Adversary& a, const std::string& protocol);

// Whether a step tag (possibly scoped, e.g. "r1/b2/bb84.deliver") is `tag`.
bool tag_is(const std::string& step_tag, const std::string& tag);

}  // namespace rspv::adv
