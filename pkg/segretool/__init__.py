"""
Segre varieties, analytic continuation and monodromy for nonminimal real hypersurfaces
"""
