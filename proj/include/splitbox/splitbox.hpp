#pragma once

#include "splitbox/audit.hpp"
#include "splitbox/bench.hpp"
#include "splitbox/bitstring.hpp"
#include "splitbox/bundle.hpp"
#include "splitbox/error.hpp"
#include "splitbox/fabric.hpp"
#include "splitbox/firewall.hpp"
#include "splitbox/hash.hpp"
#include "splitbox/nfmodel.hpp"
#include "splitbox/protocol.hpp"
#include "splitbox/random.hpp"
#include "splitbox/roles.hpp"
#include "splitbox/udp.hpp"
#include "splitbox/wire.hpp"
