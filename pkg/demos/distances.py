"""Token and subtoken distances on a small Ruby method.

Run: python3 demos/distances.py
"""

from structaware.alignment import align, expand_distance_matrix, subtokenize
from structaware.syntax import SourceUnit, distance_matrix

SOURCE = """\
def render_body(context, options)
  if options[:partial]
    render_partial(context, options)
  else
    render_template(context, options)
  end
end
"""

tree, leaves, d = distance_matrix(SourceUnit(SOURCE, "ruby"))
texts = leaves.texts
print(f"{len(leaves)} leaf tokens, {len(tree)} tree nodes")
print('d("def", "(") =', d.matrix[texts.index("def"), texts.index("(")])

subs = subtokenize(leaves)
mapping = align(subs, leaves)
e = expand_distance_matrix(d, mapping, subs)
print("subtokens:", " ".join(e.tokens[:8]), "...")
print('d("render", ":") =', e.matrix[e.tokens.index("render"), e.tokens.index(":")])

print("\nfirst eight tokens:")
print("            " + "".join(f"{t[:6]:>7}" for t in texts[:8]))
for i in range(8):
    print(f"{texts[i][:11]:>11} " + "".join(f"{v:>7}" for v in d.matrix[i, :8]))
