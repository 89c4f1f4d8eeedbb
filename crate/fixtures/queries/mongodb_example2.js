db.Projects.find({ "assigned_to": "Saba Attar", "status": "completed" });