print('analysis for round 3')