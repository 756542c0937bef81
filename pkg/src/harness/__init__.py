# Scenario runner and adversary injection
