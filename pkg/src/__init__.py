# Derived brackets package
