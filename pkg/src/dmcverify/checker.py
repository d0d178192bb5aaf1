"""Explicit-state CTLK model checking.

Two layers: build_state_graph executes an interpreted system breadth-first
(one protocol-rule instance per joint step, everyone else waits), and Model
plus check() run the usual fixpoint labeling for CTL operators with
epistemic K/GK/DK/CK via local-projection equivalence classes.  The Model
layer is independent of where the graph came from, so the same checker runs
on interpreted systems, configuration graphs, and synthetic test graphs.
"""

import time
from dataclasses import dataclass, field

from .errors import StateBudgetExceededError
from .formulas import (
    ATOM_TYPES,
    And,
    GroupKnow,
    Implies,
    Know,
    Not,
    Or,
    Unary,
    Until,
    render_formula,
)
from .semantics import DEFAULT_MAX_STATES

ENV = "Environment"


# ---------------------------------------------------------------------------
# Interpreted-system execution
# ---------------------------------------------------------------------------

@dataclass
class StateGraph:
    states: list  # global states (env_values, (agent_values, ...))
    successors: list  # list of sorted successor index lists
    initials: list
    labels: list  # edge label lists parallel to successors


def _guard_holds(tpl, vals, guard):
    return all(vals[tpl.var_index(var)] == want for var, want in guard)


def enabled_actions(tpl, vals):
    out = []
    for line in tpl.protocol:
        if _guard_holds(tpl, vals, line.guard):
            for act in line.actions:
                if act not in out:
                    out.append(act)
    return out


def _conds_hold(tpl, vals, joint, conds):
    for c in conds:
        if c[0] == "var":
            if vals[tpl.var_index(c[1])] != c[2]:
                return False
        elif c[0] == "action":
            if joint.get(c[1], "wait" if c[1] != ENV else "none") != c[2]:
                return False
        elif c[0] == "naction":
            if joint.get(c[1], "wait" if c[1] != ENV else "none") in c[2]:
                return False
        else:
            raise ValueError(c)
    return True


def _apply_lines(tpl, vals, joint):
    new = list(vals)
    fired = False
    for line in tpl.evolution:
        if _conds_hold(tpl, vals, joint, line.conds):
            fired = True
            for var, val in line.assigns:
                i = tpl.var_index(var)
                new[i] = vals[i] + 1 if val == "__inc__" else val
    return tuple(new), fired


def _instances(is_, state):
    """Enabled rule instances: {agent: action, ...} plus the env action."""
    env_vals, agent_vals = state
    names = [a.name for a in is_.agents]
    out = []
    for ai, tpl in enumerate(is_.agents):
        for act in enabled_actions(tpl, agent_vals[ai]):
            info = tpl.info[act]
            if info.kind in ("rcv", "qrcv", "wait"):
                continue  # receives fire with the matching send
            if info.kind in ("snd", "qsnd"):
                pi = names.index(info.partner)
                ptpl = is_.agents[pi]
                if info.partner_action not in enabled_actions(
                    ptpl, agent_vals[pi]
                ):
                    continue  # partner not at the matching receive: blocked
                out.append(({tpl.name: act, info.partner: info.partner_action},
                            "none", f"{tpl.name}:{act}"))
            elif info.kind == "measure":
                env_act = _measure_env_action(is_, env_vals, tpl.name, act)
                if env_act is None:
                    continue  # this outcome is impossible here
                out.append(({tpl.name: act}, env_act, f"{tpl.name}:{act}"))
            else:
                out.append(({tpl.name: act}, "none", f"{tpl.name}:{act}"))
    return out


def _measure_env_action(is_, env_vals, agent, act):
    env = is_.environment
    for line in env.evolution:
        if ("action", agent, act) not in line.conds:
            continue
        ok = True
        env_act = "none"
        for c in line.conds:
            if c[0] == "var":
                if env_vals[env.var_index(c[1])] != c[2]:
                    ok = False
                    break
            elif c[0] == "action" and c[1] == ENV:
                env_act = c[2]
        if ok:
            return env_act
    return None


def build_state_graph(is_, max_states=DEFAULT_MAX_STATES):
    """BFS over joint steps from the initial states; total via self-loops."""
    index = {}
    states = []
    queue = []
    initials = []
    for st in is_.initial_states:
        if st not in index:
            index[st] = len(states)
            states.append(st)
            queue.append(st)
        if index[st] not in initials:
            initials.append(index[st])

    successors = []
    labels = []
    names = [a.name for a in is_.agents]
    qi = 0
    while qi < len(queue):
        st = queue[qi]
        qi += 1
        src = index[st]
        outs = []
        for joint, env_act, label in _instances(is_, st):
            joint = dict(joint)
            joint[ENV] = env_act
            new_env, _ = _apply_lines(is_.environment, st[0], joint)
            new_agents = []
            for ai, tpl in enumerate(is_.agents):
                vals, _ = _apply_lines(tpl, st[1][ai], joint)
                new_agents.append(vals)
            nxt = (new_env, tuple(new_agents))
            if nxt not in index:
                if len(states) >= max_states:
                    raise StateBudgetExceededError(max_states)
                index[nxt] = len(states)
                states.append(nxt)
                queue.append(nxt)
            outs.append((label, index[nxt]))
        if not outs:
            outs.append(("wait", src))
        outs.sort()
        while len(successors) <= src:
            successors.append(None)
            labels.append(None)
        successors[src] = [d for _, d in outs]
        labels[src] = [l for l, _ in outs]
    return StateGraph(states, successors, initials, labels)


# ---------------------------------------------------------------------------
# Generic Kripke model
# ---------------------------------------------------------------------------

class Model:
    """States + total successor relation + per-agent partitions + atoms."""

    def __init__(self, n, successors, initials, agents, partitions, groups,
                 atom_eval, state_names=None):
        self.n = n
        self.successors = successors
        self.initials = list(initials)
        self.agents = list(agents)
        self.partitions = partitions  # agent -> list of class ids per state
        self.groups = dict(groups)
        self.atom_eval = atom_eval
        self._names = state_names
        self.predecessors = [[] for _ in range(n)]
        for u, outs in enumerate(successors):
            for v in outs:
                self.predecessors[v].append(u)
        self._classes = {}
        for agent, part in partitions.items():
            classes = {}
            for s, c in enumerate(part):
                classes.setdefault(c, []).append(s)
            self._classes[agent] = classes

    def name(self, s):
        return self._names[s] if self._names else f"S{s}"

    def class_of(self, agent, s):
        return self._classes[agent][self.partitions[agent][s]]


def model_from_config_graph(graph):
    from .semantics import eval_config_atom

    succ = [[] for _ in range(len(graph.nodes))]
    for e in graph.edges:
        if e.dst not in succ[e.src]:
            succ[e.src].append(e.dst)
    for lst in succ:
        lst.sort()
    agents = [a.name for a in graph.net.spec.agents]
    partitions = {}
    for agent in agents:
        seen = {}
        part = []
        for c in graph.nodes:
            view = c.local_view(agent)
            part.append(seen.setdefault(view, len(seen)))
        partitions[agent] = part
    return Model(
        len(graph.nodes), succ, graph.initials, agents, partitions,
        dict(graph.net.spec.groups),
        lambda atom, i: eval_config_atom(graph, i, atom),
        state_names=[graph.node_name(i) for i in range(len(graph.nodes))],
    )


def model_from_is(is_, sg, state_names=None):
    agents = [a.name for a in is_.agents]
    partitions = {}
    for ai, tpl in enumerate(is_.agents):
        seen = {}
        part = []
        for st in sg.states:
            part.append(seen.setdefault(st[1][ai], len(seen)))
        partitions[tpl.name] = part
    preds = {atom: pred for atom, pred in is_.atoms.items()}

    def atom_eval(atom, i):
        if atom in preds:
            return preds[atom](sg.states[i])
        from .isbuilder import make_atom_predicate
        return make_atom_predicate(is_, None, atom)(sg.states[i])

    return Model(
        len(sg.states), sg.successors, sg.initials, agents, partitions,
        dict(is_.net.spec.groups), atom_eval, state_names=state_names,
    )


# ---------------------------------------------------------------------------
# Fixpoint labeling
# ---------------------------------------------------------------------------

def _label(model, f, memo):
    if f in memo:
        return memo[f]
    n = model.n
    full = frozenset(range(n))
    if isinstance(f, ATOM_TYPES):
        sat = frozenset(s for s in range(n) if model.atom_eval(f, s))
    elif isinstance(f, Not):
        sat = full - _label(model, f.sub, memo)
    elif isinstance(f, And):
        sat = _label(model, f.left, memo) & _label(model, f.right, memo)
    elif isinstance(f, Or):
        sat = _label(model, f.left, memo) | _label(model, f.right, memo)
    elif isinstance(f, Implies):
        sat = (full - _label(model, f.left, memo)) | _label(model, f.right, memo)
    elif isinstance(f, Unary):
        sub = _label(model, f.sub, memo)
        if f.op == "EX":
            sat = _ex(model, sub)
        elif f.op == "EF":
            sat = _eu(model, full, sub)
        elif f.op == "EG":
            sat = _eg(model, sub)
        elif f.op == "AX":
            sat = full - _ex(model, full - sub)
        elif f.op == "AF":
            sat = full - _eg(model, full - sub)
        elif f.op == "AG":
            sat = full - _eu(model, full, full - sub)
        else:
            raise ValueError(f.op)
    elif isinstance(f, Until):
        a = _label(model, f.left, memo)
        b = _label(model, f.right, memo)
        if f.quantifier == "E":
            sat = _eu(model, a, b)
        else:
            # A[a U b] = !(E[!b U (!a & !b)] | EG !b)
            nb = full - b
            sat = full - (_eu(model, nb, nb - a) | _eg(model, nb))
    elif isinstance(f, Know):
        sub = _label(model, f.sub, memo)
        sat = _know(model, [f.agent], sub, joint=False)
    elif isinstance(f, GroupKnow):
        sub = _label(model, f.sub, memo)
        members = model.groups[f.group]
        if f.op == "GK":
            sat = _know(model, members, sub, joint=False)
        elif f.op == "DK":
            sat = _know(model, members, sub, joint=True)
        elif f.op == "CK":
            sat = _common(model, members, sub)
        else:
            raise ValueError(f.op)
    else:
        raise TypeError(f"unknown formula node {f!r}")
    memo[f] = sat
    return sat


def _ex(model, target):
    return frozenset(
        s for s in range(model.n)
        if any(v in target for v in model.successors[s])
    )


def _eu(model, hold, target):
    """Least fixpoint of  Z = target ∪ (hold ∩ EX Z)  via backward BFS."""
    sat = set(target)
    stack = list(target)
    while stack:
        v = stack.pop()
        for u in model.predecessors[v]:
            if u not in sat and u in hold:
                sat.add(u)
                stack.append(u)
    return frozenset(sat)


def _eg(model, hold):
    """Greatest fixpoint of  Z = hold ∩ EX Z  by iterative pruning."""
    sat = set(hold)
    changed = True
    while changed:
        changed = False
        for s in list(sat):
            if not any(v in sat for v in model.successors[s]):
                sat.discard(s)
                changed = True
    return frozenset(sat)


def _know(model, members, sub, joint):
    """K/GK (all members' classes inside sub) or DK (joint refinement)."""
    n = model.n
    if joint:
        keys = {}
        for s in range(n):
            k = tuple(model.partitions[m][s] for m in members)
            keys.setdefault(k, []).append(s)
        sat = set()
        for states in keys.values():
            if all(s in sub for s in states):
                sat.update(states)
        return frozenset(sat)
    sat = set(range(n))
    for m in members:
        ok = set()
        for states in model._classes[m].values():
            if all(s in sub for s in states):
                ok.update(states)
        sat &= ok
    return frozenset(sat)


def _common(model, members, sub):
    """CK: greatest fixpoint of GK-reachability — all states connected to s
    via any member's relation must satisfy sub."""
    parent = list(range(model.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for m in members:
        for states in model._classes[m].values():
            root = find(states[0])
            for s in states[1:]:
                parent[find(s)] = root
    comp = {}
    for s in range(model.n):
        comp.setdefault(find(s), []).append(s)
    sat = set()
    for states in comp.values():
        if all(s in sub for s in states):
            sat.update(states)
    return frozenset(sat)


# ---------------------------------------------------------------------------
# Witness extraction
# ---------------------------------------------------------------------------

def _shortest_path(model, start, targets):
    """State-name path from start to the nearest target (inclusive)."""
    prev = {start: None}
    queue = [start]
    qi = 0
    while qi < len(queue):
        u = queue[qi]
        qi += 1
        if u in targets:
            path = []
            while u is not None:
                path.append(u)
                u = prev[u]
            return list(reversed(path))
        for v in model.successors[u]:
            if v not in prev:
                prev[v] = u
                queue.append(v)
    return None


def _lasso(model, start, allowed):
    """Prefix + cycle staying inside `allowed`; start must satisfy EG."""
    path = [start]
    seen = {start: 0}
    cur = start
    while True:
        cur = next(v for v in model.successors[cur] if v in allowed)
        if cur in seen:
            i = seen[cur]
            return path[:i], path[i:]
        seen[cur] = len(path)
        path.append(cur)


def _names(model, states):
    return [model.name(s) for s in states]


def find_failure(model, f, s, memo):
    """Explain why state s does not satisfy f (s must be outside the label)."""
    full = frozenset(range(model.n))
    if isinstance(f, ATOM_TYPES):
        return {"type": "state", "state": model.name(s),
                "note": f"atom {render_formula(f)} is false"}
    if isinstance(f, Not):
        return find_success(model, f.sub, s, memo)
    if isinstance(f, And):
        for part in (f.left, f.right):
            if s not in _label(model, part, memo):
                return find_failure(model, part, s, memo)
    if isinstance(f, Or):
        return {"type": "both",
                "left": find_failure(model, f.left, s, memo),
                "right": find_failure(model, f.right, s, memo)}
    if isinstance(f, Implies):
        return {"type": "both",
                "left": find_success(model, f.left, s, memo),
                "right": find_failure(model, f.right, s, memo)}
    if isinstance(f, Unary):
        sub = _label(model, f.sub, memo)
        if f.op == "AX":
            t = next(v for v in model.successors[s] if v not in sub)
            return {"type": "path", "states": _names(model, [s, t]),
                    "then": find_failure(model, f.sub, t, memo)}
        if f.op == "AF":
            prefix, cycle = _lasso(model, s, _eg(model, full - sub))
            return {"type": "lasso", "prefix": _names(model, prefix),
                    "cycle": _names(model, cycle),
                    "then": find_failure(model, f.sub, s, memo)}
        if f.op == "AG":
            path = _shortest_path(model, s, full - sub)
            return {"type": "path", "states": _names(model, path),
                    "then": find_failure(model, f.sub, path[-1], memo)}
        # failed existential: no compact counterexample exists
        return {"type": "state", "state": model.name(s),
                "note": f"no path satisfies {render_formula(f)}"}
    if isinstance(f, Until):
        if f.quantifier == "A":
            b = _label(model, f.right, memo)
            nb = full - b
            bad = _eg(model, nb)
            if s in bad:
                prefix, cycle = _lasso(model, s, bad)
                return {"type": "lasso", "prefix": _names(model, prefix),
                        "cycle": _names(model, cycle)}
            a = _label(model, f.left, memo)
            path = _shortest_path(model, s, nb - a)
            return {"type": "path", "states": _names(model, path)}
        return {"type": "state", "state": model.name(s),
                "note": f"no path satisfies {render_formula(f)}"}
    if isinstance(f, Know):
        sub = _label(model, f.sub, memo)
        t = next(v for v in model.class_of(f.agent, s) if v not in sub)
        return {"type": "pair", "agent": f.agent,
                "states": [model.name(s), model.name(t)],
                "then": find_failure(model, f.sub, t, memo)}
    if isinstance(f, GroupKnow):
        sub = _label(model, f.sub, memo)
        members = model.groups[f.group]
        if f.op == "GK":
            for m in members:
                if s not in _label(model, Know(m, f.sub), memo):
                    return find_failure(model, Know(m, f.sub), s, memo)
        if f.op == "DK":
            key = tuple(model.partitions[m][s] for m in members)
            for t in range(model.n):
                if t not in sub and key == tuple(
                    model.partitions[m][t] for m in members
                ):
                    return {"type": "pair", "agent": f.group,
                            "states": [model.name(s), model.name(t)],
                            "then": find_failure(model, f.sub, t, memo)}
        if f.op == "CK":
            # some state in s's connected component fails the subformula
            reach = {s}
            stack = [s]
            while stack:
                u = stack.pop()
                if u not in sub:
                    return {"type": "pair", "agent": f.group,
                            "states": [model.name(s), model.name(u)],
                            "then": find_failure(model, f.sub, u, memo)}
                for m in members:
                    for v in model.class_of(m, u):
                        if v not in reach:
                            reach.add(v)
                            stack.append(v)
    return {"type": "state", "state": model.name(s)}


def _preferred_targets(model, f, sat):
    """For knowledge goals, prefer states whose equivalence class is not a
    singleton so the exhibited indistinguishable pair is two distinct states."""
    if isinstance(f, Know):
        rich = frozenset(s for s in sat if len(model.class_of(f.agent, s)) > 1)
        if rich:
            return rich
    return sat


def find_success(model, f, s, memo):
    """Exhibit why state s satisfies f (s must be inside the label)."""
    if isinstance(f, Not):
        return find_failure(model, f.sub, s, memo)
    if isinstance(f, Unary):
        sub = _label(model, f.sub, memo)
        if f.op == "EX":
            t = next(v for v in model.successors[s] if v in sub)
            return {"type": "path", "states": _names(model, [s, t]),
                    "then": find_success(model, f.sub, t, memo)}
        if f.op == "EF":
            path = _shortest_path(model, s, _preferred_targets(model, f.sub, sub))
            if path is None:
                path = _shortest_path(model, s, sub)
            return {"type": "path", "states": _names(model, path),
                    "then": find_success(model, f.sub, path[-1], memo)}
        if f.op == "EG":
            prefix, cycle = _lasso(model, s, _eg(model, sub))
            return {"type": "lasso", "prefix": _names(model, prefix),
                    "cycle": _names(model, cycle)}
    if isinstance(f, Until) and f.quantifier == "E":
        b = _label(model, f.right, memo)
        path = _shortest_path(model, s, b)
        return {"type": "path", "states": _names(model, path),
                "then": find_success(model, f.right, path[-1], memo)}
    if isinstance(f, Know):
        cls = model.class_of(f.agent, s)
        t = next((v for v in cls if v != s), s)
        return {"type": "pair", "agent": f.agent,
                "states": [model.name(s), model.name(t)],
                "then": find_success(model, f.sub, t, memo)}
    return {"type": "state", "state": model.name(s)}


# ---------------------------------------------------------------------------
# Top level
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    formula: object
    verdict: bool
    satisfying: frozenset
    witness: dict | None
    seconds: float = 0.0


@dataclass
class VerificationReport:
    results: list

    @property
    def all_true(self):
        return all(r.verdict for r in self.results)


def check(model, formula, memo=None):
    """verdict (all initial states satisfy), label set, and a witness for
    failed formulas."""
    memo = {} if memo is None else memo
    sat = _label(model, formula, memo)
    failing = [s for s in model.initials if s not in sat]
    witness = None
    if failing:
        witness = find_failure(model, formula, failing[0], memo)
    return CheckResult(formula, not failing, sat, witness)


def check_all(model, formulas):
    memo = {}
    results = []
    for f in formulas:
        t0 = time.perf_counter()
        r = check(model, f, memo)
        r.seconds = time.perf_counter() - t0
        results.append(r)
    return VerificationReport(results)
