"""Walk through the scoring core: threshold windows, satisfaction, rewards.

A sequence is judged per attribute against a closed target window. Inside
the window satisfaction is 1; outside it falls off linearly toward the
range end, hitting 0 at the boundary. An edit's reward weighs where it
lands twice as heavily as where it started, so the same landing point is
worth more when the start was bad.
"""

from macs import (
    AttributeSpace,
    AttributeSpec,
    AttributeVector,
    MultiConstraint,
    ThresholdWindow,
    attribute_reward,
    satisfaction_score,
    satisfies,
    total_reward,
)

space = AttributeSpace(
    (AttributeSpec("sentiment", 1.0, 5.0), AttributeSpec("complexity", -2.0, 2.0))
)
window = ThresholdWindow("sentiment", 2.5, 3.5)
spec = space.specs[0]

print("satisfaction against sentiment window [2.5, 3.5] over range [1, 5]")
for value in (1.0, 1.75, 2.5, 3.0, 3.5, 4.25, 5.0):
    f = satisfaction_score(value, window, spec)
    where = "inside" if window.contains(value) else "outside"
    print(f"  f({value:4.2f}) = {f:5.3f}   ({where})")

print()
print("reward for an edit is 2*f(new) - f(old), in [-1, 2]:")
for old, new in ((1.75, 3.0), (3.0, 3.0), (3.0, 1.75), (1.75, 4.25)):
    r = attribute_reward(new, old, window, spec)
    print(f"  {old:4.2f} -> {new:4.2f}   reward {r:+5.2f}")

# The same landing point scores higher from a worse start.
assert attribute_reward(3.0, 1.0, window, spec) > attribute_reward(3.0, 2.5, window, spec)

print()
constraint = MultiConstraint(
    (window, ThresholdWindow("complexity", -0.5, 0.5))
)
old = AttributeVector((1.75, 0.0))
new = AttributeVector((3.0, 1.25))
print("multi-attribute edit, with two raw bonus scores appended:")
print(f"  satisfied before: {satisfies(old, constraint)}")
print(f"  satisfied after:  {satisfies(new, constraint)}")
r = total_reward(new, old, constraint, space, bonuses=[0.9, 0.7])
print(f"  total reward: {r:.4f}  (bounded by [-k, 2k + #bonuses] = [-2, 6])")
