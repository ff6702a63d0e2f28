#!/usr/bin/env python3
"""How the two benchmark numbers are computed from the accuracy ledger.

The ledger is a lower-triangular table: row t holds the accuracy of the
model after learning task t, evaluated on the test split of every task
j <= t. Average accuracy at stage t is the mean of row t. Forgetting at
stage t compares each earlier task's current accuracy against the best
accuracy any earlier-stage model achieved on it.
"""

from streamproto import (AccuracyLedger, average_accuracy,
                         average_forgetting, ledger_to_csv)

ledger = AccuracyLedger(3)

# stage 1: trained on task 1 only
ledger.set_accuracy(1, 1, 0.92)

# stage 2: task 1 degrades, task 2 is fresh
ledger.set_accuracy(2, 1, 0.71)
ledger.set_accuracy(2, 2, 0.88)

# stage 3: task 1 recovers a little, task 2 degrades
ledger.set_accuracy(3, 1, 0.75)
ledger.set_accuracy(3, 2, 0.80)
ledger.set_accuracy(3, 3, 0.90)

for stage in (1, 2, 3):
    aa = average_accuracy(ledger, stage)
    line = f"stage {stage}: AA={aa:.4f}"
    if stage >= 2:
        fr = average_forgetting(ledger, stage)
        line += f"  FR={fr:.4f}"
    print(line)

# By hand for stage 3:
#   task 1: best earlier was max(0.92, 0.71) = 0.92, now 0.75, drop 0.17
#   task 2: best earlier was 0.88, now 0.80, drop 0.08
#   FR_3 = (0.17 + 0.08) / 2 = 0.125
print("hand check FR_3:", (0.17 + 0.08) / 2)

print()
print(ledger_to_csv(ledger))
