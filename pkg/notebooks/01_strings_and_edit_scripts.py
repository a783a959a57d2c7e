# %% [markdown]
# # Comparators and edit scripts
#
# Every later stage leans on two string comparators and on one minimal edit
# script per name pair.  This walk-through shows what each returns on a few
# familiar names.

# %%
from linkstress.strings import edit_script, jaro, jaro_winkler, levenshtein

pairs = [("MARTHA", "MARHTA"), ("JON", "JOHN"), ("SMITH", "SMYTHE"), ("KITTEN", "SITTING")]
for a, b in pairs:
    print(f"{a:8} {b:8} lev={levenshtein(a, b)}  jaro={jaro(a, b):.4f}  "
          f"jw={jaro_winkler(a, b):.4f}")

# %% [markdown]
# The Winkler bonus rewards a shared prefix (up to four characters), so
# transpositions late in a name cost little.  Edit scripts give the
# operations themselves, indexed in the target string.

# %%
from linkstress.profiling import classify_edit

for a, b in pairs[1:]:
    ops = edit_script(a, b)
    cls = classify_edit(a, b)
    print(f"{a} -> {b}: {[(op.kind, op.position, op.char) for op in ops]}")
    print(f"    primary type {cls.primary_type}, bucket {cls.bucket}, position {cls.position}")
